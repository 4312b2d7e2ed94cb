//! Synthetic treebanks from a small clause grammar with switchable
//! attachment conventions.
//!
//! Every treebank shares one grammar (subject, optional auxiliary, verb,
//! optional particle and object, optional verbal PP, nominal `of` PPs and
//! NP coordination) but can differ in how four constructions are attached.
//! Each treebank draws its content words from its own domain lexicon.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conllu::{write_conllu, Sentence, Token, Treebank};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuxConvention {
    /// The auxiliary depends on the main verb.
    Verb,
    /// The auxiliary heads the clause; the main verb is its `xcomp`.
    Aux,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdpConvention {
    /// The adposition is a `case` dependent of its noun.
    Case,
    /// The adposition heads its noun (`pobj`) and attaches as `prep`.
    Prep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordConvention {
    /// Conjuncts attach to the first conjunct; the conjunction to the second.
    First,
    /// The conjunction attaches to the first conjunct, the second to the conjunction.
    Chain,
    /// The conjunction heads both conjuncts.
    CcHead,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParticleConvention {
    /// `compound:prt` of the verb.
    Verb,
    /// `advmod` of the object noun.
    Object,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    /// Used to train parsers.
    Train,
    /// Held out as the out-of-domain test treebank.
    Ood,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreebankSpec {
    pub name: String,
    pub role: Role,
    /// Domain lexicon key: one of `a`, `b`, `c`, `x`.
    pub domain: String,
    pub aux: AuxConvention,
    pub adp: AdpConvention,
    pub coord: CoordConvention,
    pub particle: ParticleConvention,
}

/// Serialized name of a convention, as written in suite files.
fn kebab<T: Serialize>(value: &T) -> String {
    match toml::Value::try_from(value) {
        Ok(toml::Value::String(s)) => s,
        _ => String::new(),
    }
}

impl std::fmt::Display for TreebankSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "role={} domain={} aux={} adp={} coord={} particle={}",
            kebab(&self.role),
            self.domain,
            kebab(&self.aux),
            kebab(&self.adp),
            kebab(&self.coord),
            kebab(&self.particle)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub seed: u64,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub treebank: Vec<TreebankSpec>,
}

pub const SPLITS: [&str; 3] = ["train", "dev", "test"];

impl SuiteSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SuiteSpec = toml::from_str(text).map_err(|e| Error::SuiteSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("suite spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.treebank.iter().all(|t| t.role != Role::Train) {
            return Err(Error::SuiteSpec("at least one training treebank is required".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for tb in &self.treebank {
            if tb.name.is_empty() || tb.name.contains(|c: char| c.is_whitespace() || c == '/') {
                return Err(Error::SuiteSpec(format!("invalid treebank name {:?}", tb.name)));
            }
            if !names.insert(&tb.name) {
                return Err(Error::SuiteSpec(format!("duplicate treebank name {}", tb.name)));
            }
            if domain_letters(&tb.domain).is_none() {
                return Err(Error::SuiteSpec(format!("unknown domain {:?}", tb.domain)));
            }
        }
        if self.train == 0 {
            return Err(Error::SuiteSpec("train split must be non-empty".into()));
        }
        Ok(())
    }

    pub fn split_size(&self, split: &str) -> usize {
        match split {
            "train" => self.train,
            "dev" => self.dev,
            _ => self.test,
        }
    }
}

fn spec(
    name: &str,
    role: Role,
    domain: &str,
    aux: AuxConvention,
    adp: AdpConvention,
    coord: CoordConvention,
    particle: ParticleConvention,
) -> TreebankSpec {
    TreebankSpec {
        name: name.into(),
        role,
        domain: domain.into(),
        aux,
        adp,
        coord,
        particle,
    }
}

/// Three training treebanks with pairwise different conventions and an
/// out-of-domain treebank mixing them.
pub fn default_suite() -> SuiteSpec {
    use AdpConvention as P;
    use AuxConvention as X;
    use CoordConvention as C;
    use ParticleConvention as T;
    SuiteSpec {
        seed: 1,
        train: 500,
        dev: 100,
        test: 100,
        treebank: vec![
            spec("A", Role::Train, "a", X::Verb, P::Case, C::First, T::Verb),
            spec("B", Role::Train, "b", X::Aux, P::Case, C::Chain, T::Object),
            spec("C", Role::Train, "c", X::Verb, P::Prep, C::CcHead, T::Object),
            spec("X", Role::Ood, "x", X::Aux, P::Prep, C::First, T::Verb),
        ],
    }
}

/// The default suite with every treebank using the first treebank's
/// conventions.
pub fn control_suite() -> SuiteSpec {
    let mut suite = default_suite();
    let first = suite.treebank[0].clone();
    for tb in &mut suite.treebank {
        tb.aux = first.aux;
        tb.adp = first.adp;
        tb.coord = first.coord;
        tb.particle = first.particle;
    }
    suite
}

fn domain_letters(domain: &str) -> Option<(&'static [char], &'static [char])> {
    Some(match domain {
        "a" => (&['b', 'd', 'g'], &['a', 'o']),
        "b" => (&['k', 't', 'p'], &['e', 'i']),
        "c" => (&['m', 'n', 'l'], &['u', 'a']),
        "x" => (&['b', 'k', 'm', 's'], &['o', 'e', 'u']),
        _ => return None,
    })
}

const DETS: [&str; 4] = ["the", "a", "this", "every"];
const AUXES: [&str; 4] = ["will", "can", "must", "may"];
const VERBAL_ADPS: [&str; 4] = ["in", "on", "with", "near"];
const CONJS: [&str; 2] = ["and", "or"];
const PARTICLES: [&str; 3] = ["up", "out", "off"];
const PUNCTS: [&str; 2] = [".", "!"];

struct Lexicon {
    nouns: Vec<String>,
    verbs: Vec<String>,
    adjs: Vec<String>,
}

impl Lexicon {
    fn new(domain: &str, seed: u64) -> Lexicon {
        let (consonants, vowels) = domain_letters(domain).expect("validated domain");
        let syllables: Vec<String> = consonants
            .iter()
            .flat_map(|c| vowels.iter().map(move |v| format!("{c}{v}")))
            .collect();
        let mut stems: Vec<String> = syllables
            .iter()
            .flat_map(|a| syllables.iter().map(move |b| format!("{a}{b}")))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1e71);
        stems.shuffle(&mut rng);
        let take = |from: usize, n: usize, suffix: &str| -> Vec<String> {
            stems.iter().cycle().skip(from).take(n).map(|s| format!("{s}{suffix}")).collect()
        };
        Lexicon {
            nouns: take(0, 20, "an"),
            verbs: take(20, 12, "es"),
            adjs: take(32, 8, "y"),
        }
    }
}

/// Tokens under construction; heads are 0-based positions, `None` for root.
#[derive(Default)]
struct Builder {
    forms: Vec<String>,
    upos: Vec<&'static str>,
    heads: Vec<Option<usize>>,
    labels: Vec<&'static str>,
}

impl Builder {
    fn push(&mut self, form: impl Into<String>, upos: &'static str) -> usize {
        self.forms.push(form.into());
        self.upos.push(upos);
        self.heads.push(None);
        self.labels.push("");
        self.forms.len() - 1
    }

    fn attach(&mut self, dep: usize, head: usize, label: &'static str) {
        self.heads[dep] = Some(head);
        self.labels[dep] = label;
    }

    fn root(&mut self, dep: usize) {
        self.heads[dep] = None;
        self.labels[dep] = "root";
    }
}

/// A phrase whose external attachment is still open.
struct Phrase {
    /// Token that attaches outward.
    head: usize,
    /// The phrase is a bare determiner-adjective-noun group.
    simple: bool,
}

struct Generator<'a> {
    spec: &'a TreebankSpec,
    lex: &'a Lexicon,
}

fn pick<'s, R: Rng, S: AsRef<str>>(rng: &mut R, items: &'s [S]) -> &'s str {
    items[rng.gen_range(0..items.len())].as_ref()
}

impl Generator<'_> {
    fn simple_np<R: Rng>(&self, b: &mut Builder, rng: &mut R) -> usize {
        let det = rng.gen_bool(0.7).then(|| b.push(pick(rng, &DETS), "DET"));
        let adj = rng.gen_bool(0.3).then(|| b.push(pick(rng, &self.lex.adjs), "ADJ"));
        let noun = b.push(pick(rng, &self.lex.nouns), "NOUN");
        if let Some(d) = det {
            b.attach(d, noun, "det");
        }
        if let Some(a) = adj {
            b.attach(a, noun, "amod");
        }
        noun
    }

    /// Adposition plus noun phrase; returns (adposition, noun).
    fn adp_phrase<R: Rng>(&self, b: &mut Builder, rng: &mut R, adp: &str) -> Phrase {
        let a = b.push(adp, "ADP");
        let noun = self.simple_np(b, rng);
        match self.spec.adp {
            AdpConvention::Case => {
                b.attach(a, noun, "case");
                Phrase { head: noun, simple: false }
            }
            AdpConvention::Prep => {
                b.attach(noun, a, "pobj");
                Phrase { head: a, simple: false }
            }
        }
    }

    fn attach_adp(&self, b: &mut Builder, phrase: &Phrase, head: usize, case_label: &'static str) {
        let label = match self.spec.adp {
            AdpConvention::Case => case_label,
            AdpConvention::Prep => "prep",
        };
        b.attach(phrase.head, head, label);
    }

    fn np<R: Rng>(&self, b: &mut Builder, rng: &mut R) -> Phrase {
        let roll: f64 = rng.gen();
        if roll < 0.15 {
            let first = self.simple_np(b, rng);
            let cc = b.push(pick(rng, &CONJS), "CCONJ");
            let second = self.simple_np(b, rng);
            let head = match self.spec.coord {
                CoordConvention::First => {
                    b.attach(cc, second, "cc");
                    b.attach(second, first, "conj");
                    first
                }
                CoordConvention::Chain => {
                    b.attach(cc, first, "cc");
                    b.attach(second, cc, "conj");
                    first
                }
                CoordConvention::CcHead => {
                    b.attach(first, cc, "conj");
                    b.attach(second, cc, "conj");
                    cc
                }
            };
            Phrase { head, simple: false }
        } else if roll < 0.30 {
            let noun = self.simple_np(b, rng);
            let pp = self.adp_phrase(b, rng, "of");
            self.attach_adp(b, &pp, noun, "nmod");
            Phrase { head: noun, simple: false }
        } else {
            Phrase {
                head: self.simple_np(b, rng),
                simple: true,
            }
        }
    }

    fn sentence<R: Rng>(&self, rng: &mut R) -> Builder {
        let mut b = Builder::default();
        let subj = self.np(&mut b, rng);
        let aux = rng.gen_bool(0.4).then(|| b.push(pick(rng, &AUXES), "AUX"));
        let verb = b.push(pick(rng, &self.lex.verbs), "VERB");
        let clause_head = match (aux, self.spec.aux) {
            (Some(a), AuxConvention::Aux) => {
                b.attach(verb, a, "xcomp");
                a
            }
            (Some(a), AuxConvention::Verb) => {
                b.attach(a, verb, "aux");
                verb
            }
            (None, _) => verb,
        };
        b.root(clause_head);
        b.attach(subj.head, clause_head, "nsubj");

        if rng.gen_bool(0.7) {
            let particle = rng.gen_bool(0.3).then(|| b.push(pick(rng, &PARTICLES), "ADP"));
            let obj = match particle {
                Some(_) => Phrase {
                    head: self.simple_np(&mut b, rng),
                    simple: true,
                },
                None => self.np(&mut b, rng),
            };
            b.attach(obj.head, verb, "obj");
            if let Some(p) = particle {
                debug_assert!(obj.simple);
                match self.spec.particle {
                    ParticleConvention::Verb => b.attach(p, verb, "compound:prt"),
                    ParticleConvention::Object => b.attach(p, obj.head, "advmod"),
                }
            }
        }
        if rng.gen_bool(0.35) {
            let adp = pick(rng, &VERBAL_ADPS);
            let pp = self.adp_phrase(&mut b, rng, adp);
            self.attach_adp(&mut b, &pp, verb, "obl");
        }
        let punct = b.push(pick(rng, &PUNCTS), "PUNCT");
        b.attach(punct, clause_head, "punct");
        b
    }
}

fn to_sentence(id: String, b: Builder, treebank: usize) -> Sentence {
    let tokens = b
        .forms
        .into_iter()
        .zip(b.upos)
        .zip(b.heads.iter().zip(b.labels))
        .enumerate()
        .map(|(i, ((form, upos), (head, label)))| {
            Token::new(i + 1, form)
                .with_upos(upos)
                .with_dep(head.map_or(0, |h| h + 1), label)
        })
        .collect();
    Sentence::new(id, tokens, Some(treebank))
}

/// Generates every treebank of the suite. Treebank ids are 1-based in spec
/// order.
pub fn generate_synthetic_suite(spec: &SuiteSpec) -> Result<Vec<Treebank>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.treebank.len());
    for (i, tb_spec) in spec.treebank.iter().enumerate() {
        let id = i + 1;
        let lex = Lexicon::new(&tb_spec.domain, spec.seed);
        let generator = Generator { spec: tb_spec, lex: &lex };
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(1_000_003).wrapping_add(id as u64));
        let mut treebank = Treebank::new(id, tb_spec.name.clone());
        for split in SPLITS {
            let sentences = (0..spec.split_size(split))
                .map(|k| {
                    let sid = format!("{}-{split}-{:04}", tb_spec.name, k + 1);
                    to_sentence(sid, generator.sentence(&mut rng), id)
                })
                .collect();
            treebank.splits.insert(split.to_string(), sentences);
        }
        out.push(treebank);
    }
    Ok(out)
}

/// Relative path of a generated split inside a suite directory.
pub fn split_path(treebank: &str, split: &str) -> String {
    format!("{treebank}/{split}.conllu")
}

/// CoNLL-U text for every split, keyed by relative path.
pub fn render_suite(treebanks: &[Treebank]) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    for tb in treebanks {
        for (split, sentences) in &tb.splits {
            files.insert(split_path(&tb.name, split), write_conllu(sentences));
        }
    }
    files
}

/// Writes the suite below `dir` together with its `suite.toml`.
pub fn write_suite(dir: &Path, spec: &SuiteSpec, treebanks: &[Treebank]) -> Result<()> {
    for (rel, text) in render_suite(treebanks) {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, text)?;
    }
    std::fs::write(dir.join("suite.toml"), spec.to_toml())?;
    Ok(())
}
