//! Transition systems, static oracles and projectivization.
//!
//! Positions are 0-based token indices; the artificial root is `n` and sits
//! at the bottom of the stack. The root can only take a dependent once the
//! buffer is empty, which guarantees a single root.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Shift,
    LeftArc(usize),
    RightArc(usize),
}

impl Action {
    pub fn index(self, n_labels: usize) -> usize {
        match self {
            Action::Shift => 0,
            Action::LeftArc(l) => 1 + l,
            Action::RightArc(l) => 1 + n_labels + l,
        }
    }

    pub fn from_index(index: usize, n_labels: usize) -> Action {
        if index == 0 {
            Action::Shift
        } else if index <= n_labels {
            Action::LeftArc(index - 1)
        } else {
            Action::RightArc(index - 1 - n_labels)
        }
    }
}

pub fn n_actions(n_labels: usize) -> usize {
    1 + 2 * n_labels
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TransitionSystem {
    /// Left-arc attaches `s0` to `b0`; right-arc attaches `s0` to `s1`.
    #[default]
    ArcHybrid,
    /// Left-arc attaches `s1` to `s0`; right-arc attaches `s0` to `s1`.
    ArcStandard,
}

impl TransitionSystem {
    pub fn name(self) -> &'static str {
        match self {
            TransitionSystem::ArcHybrid => "arc-hybrid",
            TransitionSystem::ArcStandard => "arc-standard",
        }
    }
}

impl fmt::Display for TransitionSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransitionSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arc-hybrid" => Ok(TransitionSystem::ArcHybrid),
            "arc-standard" => Ok(TransitionSystem::ArcStandard),
            other => Err(Error::Config(format!("unknown transition system {other:?}"))),
        }
    }
}

/// Parser configuration.
#[derive(Clone, Debug)]
pub struct State {
    n: usize,
    pub stack: Vec<usize>,
    /// Next buffer position; the buffer is `next..n`.
    pub next: usize,
    pub heads: Vec<Option<usize>>,
    pub labels: Vec<Option<usize>>,
    leftmost: Vec<Option<usize>>,
}

impl State {
    pub fn new(n: usize) -> Self {
        State {
            n,
            stack: vec![n],
            next: 0,
            heads: vec![None; n],
            labels: vec![None; n],
            leftmost: vec![None; n + 1],
        }
    }

    pub fn root(&self) -> usize {
        self.n
    }

    pub fn is_terminal(&self) -> bool {
        self.next == self.n && self.stack.len() == 1
    }

    /// `i`-th item from the top of the stack.
    pub fn stack_item(&self, i: usize) -> Option<usize> {
        self.stack.len().checked_sub(i + 1).map(|p| self.stack[p])
    }

    pub fn buffer_front(&self) -> Option<usize> {
        (self.next < self.n).then_some(self.next)
    }

    pub fn leftmost_child(&self, item: usize) -> Option<usize> {
        self.leftmost[item]
    }

    pub fn is_legal(&self, system: TransitionSystem, action: Action) -> bool {
        let buffer_empty = self.next == self.n;
        let depth = self.stack.len();
        match action {
            Action::Shift => !buffer_empty,
            Action::LeftArc(_) => match system {
                TransitionSystem::ArcHybrid => !buffer_empty && depth >= 1 && self.stack[depth - 1] != self.n,
                TransitionSystem::ArcStandard => depth >= 2 && self.stack[depth - 2] != self.n,
            },
            Action::RightArc(_) => depth >= 2 && (self.stack[depth - 2] != self.n || buffer_empty),
        }
    }

    fn attach(&mut self, head: usize, dep: usize, label: usize) {
        self.heads[dep] = Some(head);
        self.labels[dep] = Some(label);
        let lm = &mut self.leftmost[head];
        if lm.is_none_or(|l| dep < l) {
            *lm = Some(dep);
        }
    }

    /// Applies a legal action.
    pub fn apply(&mut self, system: TransitionSystem, action: Action) {
        debug_assert!(self.is_legal(system, action));
        match (system, action) {
            (_, Action::Shift) => {
                self.stack.push(self.next);
                self.next += 1;
            }
            (TransitionSystem::ArcHybrid, Action::LeftArc(l)) => {
                let s0 = self.stack.pop().expect("legal left-arc");
                self.attach(self.next, s0, l);
            }
            (TransitionSystem::ArcStandard, Action::LeftArc(l)) => {
                let s0 = self.stack.pop().expect("legal left-arc");
                let s1 = self.stack.pop().expect("legal left-arc");
                self.attach(s0, s1, l);
                self.stack.push(s0);
            }
            (_, Action::RightArc(l)) => {
                let s0 = self.stack.pop().expect("legal right-arc");
                let s1 = *self.stack.last().expect("legal right-arc");
                self.attach(s1, s0, l);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    NonProjective,
    Malformed(String),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::NonProjective => write!(f, "tree is not projective"),
            OracleError::Malformed(m) => write!(f, "malformed tree: {m}"),
        }
    }
}

/// Converts 1-based CoNLL-U heads (0 = root) to 0-based positions with the
/// root at `n`.
pub fn positions_from_heads(heads: &[usize]) -> Vec<usize> {
    let n = heads.len();
    heads.iter().map(|&h| if h == 0 { n } else { h - 1 }).collect()
}

/// Static oracle. `heads` are 1-based (0 = root), `labels` label ids.
pub fn oracle_transitions(
    system: TransitionSystem,
    heads: &[usize],
    labels: &[usize],
) -> Result<Vec<Action>, OracleError> {
    let n = heads.len();
    if labels.len() != n {
        return Err(OracleError::Malformed("label count differs from head count".into()));
    }
    if heads.iter().any(|&h| h > n) {
        return Err(OracleError::Malformed("head out of range".into()));
    }
    if !is_projective(heads) {
        return Err(OracleError::NonProjective);
    }
    let gold = positions_from_heads(heads);
    let mut pending = vec![0usize; n + 1];
    for &h in &gold {
        pending[h] += 1;
    }

    let mut state = State::new(n);
    let mut actions = Vec::with_capacity(2 * n);
    while !state.is_terminal() {
        let s0 = state.stack_item(0);
        let s1 = state.stack_item(1);
        let b0 = state.buffer_front();
        let action = match system {
            TransitionSystem::ArcHybrid => match (s0, b0) {
                (Some(s0), Some(b0)) if s0 != n && gold[s0] == b0 => Action::LeftArc(labels[s0]),
                _ => match (s0, s1) {
                    (Some(s0), Some(s1)) if gold[s0] == s1 && pending[s0] == 0 && (s1 != n || b0.is_none()) => {
                        Action::RightArc(labels[s0])
                    }
                    _ => Action::Shift,
                },
            },
            TransitionSystem::ArcStandard => match (s0, s1) {
                (Some(s0), Some(s1)) if s1 != n && gold[s1] == s0 && pending[s1] == 0 => Action::LeftArc(labels[s1]),
                (Some(s0), Some(s1)) if gold[s0] == s1 && pending[s0] == 0 && (s1 != n || b0.is_none()) => {
                    Action::RightArc(labels[s0])
                }
                _ => Action::Shift,
            },
        };
        if !state.is_legal(system, action) {
            return Err(OracleError::Malformed("oracle reached a dead end".into()));
        }
        if let Action::LeftArc(_) | Action::RightArc(_) = action {
            let dep = match (system, action) {
                (TransitionSystem::ArcStandard, Action::LeftArc(_)) => s1.expect("checked"),
                _ => s0.expect("checked"),
            };
            pending[gold[dep]] -= 1;
        }
        state.apply(system, action);
        actions.push(action);
    }
    let reached: Vec<usize> = state.heads.iter().map(|h| h.expect("terminal state is complete")).collect();
    if reached != gold {
        return Err(OracleError::Malformed("oracle did not reproduce the tree".into()));
    }
    Ok(actions)
}

fn dominates(gold: &[usize], head: usize, mut node: usize) -> bool {
    let n = gold.len();
    let mut steps = 0;
    while node != n && steps <= n {
        if node == head {
            return true;
        }
        node = gold[node];
        steps += 1;
    }
    node == head
}

/// Arcs whose span contains a token the head does not dominate, as
/// 0-based dependent positions.
fn non_projective_arcs(gold: &[usize]) -> Vec<usize> {
    let n = gold.len();
    (0..n)
        .filter(|&d| {
            let h = gold[d];
            if h == n {
                return false;
            }
            let (lo, hi) = if h < d { (h, d) } else { (d, h) };
            (lo + 1..hi).any(|k| !dominates(gold, h, k))
        })
        .collect()
}

/// True if every arc only spans descendants of its head. 1-based heads.
pub fn is_projective(heads: &[usize]) -> bool {
    non_projective_arcs(&positions_from_heads(heads)).is_empty()
}

/// Lifts the shortest non-projective arc to the grandparent until the tree
/// is projective. Labels are left untouched. 1-based heads in and out.
pub fn projectivize(heads: &[usize]) -> Vec<usize> {
    let n = heads.len();
    let mut gold = positions_from_heads(heads);
    loop {
        let arcs = non_projective_arcs(&gold);
        let Some(&dep) = arcs.iter().min_by_key(|&&d| (gold[d].abs_diff(d), d)) else {
            break;
        };
        gold[dep] = gold[gold[dep]];
    }
    gold.iter().map(|&h| if h == n { 0 } else { h + 1 }).collect()
}
