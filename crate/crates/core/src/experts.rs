//! Goal-specific low-level policies.
//!
//! An [`Expert`] scores every candidate action in the current percept with a
//! small utility network and picks the best one. The network is trained
//! after each trial: every (percept, action) pair of the trial gets the
//! trial's binary outcome as its label, and the cross-entropy gradients are
//! applied one sample at a time with Adam.

use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, GripperCmd, Heading, Vertical};
use crate::goal_memory::GoalId;

static CANDIDATES: LazyLock<Vec<Action>> = LazyLock::new(|| {
    let headings = Heading::ALL.iter().copied().map(Some).chain(std::iter::once(None));
    let mut out = Vec::with_capacity(54);
    for heading in headings {
        for vertical in [Vertical::Raise, Vertical::Lower] {
            for gripper in [GripperCmd::Open, GripperCmd::Close, GripperCmd::Hold] {
                out.push(Action { heading, vertical, gripper });
            }
        }
    }
    out
});

/// The discrete action set: 8 headings and the null heading, each combined
/// with {raise, lower} × {open, close, hold}.
pub fn propose_candidates() -> Vec<Action> {
    CANDIDATES.clone()
}

pub fn candidates() -> &'static [Action] {
    &CANDIDATES
}

pub fn candidate_count() -> usize {
    CANDIDATES.len()
}

/// Uniformly random candidate, independent of what the robot perceives.
pub fn exploratory_action(rng: &mut impl Rng) -> usize {
    rng.gen_range(0..CANDIDATES.len())
}

fn softsign(x: f64) -> f64 {
    x / (1.0 + x.abs())
}

fn softsign_grad(x: f64) -> f64 {
    let d = 1.0 + x.abs();
    1.0 / (d * d)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// How candidate actions are presented to the utility network: each action
/// switches on a set of binary action inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCodes {
    features: usize,
    active: Vec<Vec<usize>>,
}

impl ActionCodes {
    /// One input per action.
    pub fn one_hot(actions: usize) -> Self {
        ActionCodes { features: actions, active: (0..actions).map(|a| vec![a]).collect() }
    }

    /// One-hot heading (8 directions and none), one-hot vertical command,
    /// one-hot gripper command, concatenated. Actions sharing a component
    /// share its weights.
    pub fn factored() -> Self {
        let heading = |a: &Action| a.heading.map_or(8, |h| Heading::ALL.iter().position(|&x| x == h).expect("heading"));
        let vertical = |a: &Action| match a.vertical {
            Vertical::Raise => 0,
            Vertical::Lower => 1,
            Vertical::Hold => 2,
        };
        let gripper = |a: &Action| match a.gripper {
            GripperCmd::Open => 0,
            GripperCmd::Close => 1,
            GripperCmd::Hold => 2,
        };
        ActionCodes {
            features: 9 + 3 + 3,
            active: candidates()
                .iter()
                .map(|a| vec![heading(a), 9 + vertical(a), 12 + gripper(a)])
                .collect(),
        }
    }

    pub fn actions(&self) -> usize {
        self.active.len()
    }

    pub fn features(&self) -> usize {
        self.features
    }
}

/// Single-hidden-layer utility network over [percept features ‖ action
/// code]. Hidden units use the softsign nonlinearity; the output is a
/// sigmoid, so utilities lie in [0, 1].
///
/// The first-layer weights are stored split into the percept block and the
/// action block, so the percept part is computed once per state and each
/// action only adds its active rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityModel {
    inputs: usize,
    hidden: usize,
    codes: ActionCodes,
    /// hidden × inputs, row-major
    w_percept: Vec<f64>,
    /// action features × hidden, row-major
    w_action: Vec<f64>,
    b_hidden: Vec<f64>,
    w_out: Vec<f64>,
    b_out: f64,
}

impl UtilityModel {
    pub fn new(inputs: usize, hidden: usize, codes: ActionCodes, rng: &mut impl Rng) -> Self {
        let s1 = 1.0 / ((inputs + 1) as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        UtilityModel {
            inputs,
            hidden,
            w_percept: (0..hidden * inputs).map(|_| rng.gen_range(-s1..s1)).collect(),
            w_action: (0..codes.features * hidden).map(|_| rng.gen_range(-s1..s1)).collect(),
            b_hidden: vec![0.0; hidden],
            w_out: (0..hidden).map(|_| rng.gen_range(-s2..s2)).collect(),
            b_out: 0.0,
            codes,
        }
    }

    /// A model whose output is the same for every input.
    pub fn constant(inputs: usize, hidden: usize, codes: ActionCodes) -> Self {
        UtilityModel {
            inputs,
            hidden,
            w_percept: vec![0.0; hidden * inputs],
            w_action: vec![0.0; codes.features * hidden],
            b_hidden: vec![0.0; hidden],
            w_out: vec![0.0; hidden],
            b_out: 0.0,
            codes,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn actions(&self) -> usize {
        self.codes.actions()
    }

    fn hidden_base(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        (0..self.hidden)
            .map(|j| {
                let row = &self.w_percept[j * self.inputs..(j + 1) * self.inputs];
                self.b_hidden[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    fn pre_activation(&self, base: &[f64], action: usize) -> Vec<f64> {
        let h = self.hidden;
        let mut pre = base.to_vec();
        for &f in &self.codes.active[action] {
            for (p, w) in pre.iter_mut().zip(&self.w_action[f * h..(f + 1) * h]) {
                *p += w;
            }
        }
        pre
    }

    fn logit_from_base(&self, base: &[f64], action: usize) -> f64 {
        let pre = self.pre_activation(base, action);
        self.b_out + pre.iter().zip(&self.w_out).map(|(&p, w)| w * softsign(p)).sum::<f64>()
    }

    pub fn score(&self, x: &[f64], action: usize) -> f64 {
        sigmoid(self.logit_from_base(&self.hidden_base(x), action))
    }

    /// Hidden-unit inputs before the nonlinearity.
    pub fn pre_activations(&self, x: &[f64], action: usize) -> Vec<f64> {
        self.pre_activation(&self.hidden_base(x), action)
    }

    /// Logits for every action; the sigmoid is monotone so these rank
    /// actions exactly like the utilities do.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let base = self.hidden_base(x);
        (0..self.actions()).map(|a| self.logit_from_base(&base, a)).collect()
    }

    /// Binary cross-entropy of the utility against `label`.
    pub fn loss(&self, x: &[f64], action: usize, label: f64) -> f64 {
        // Logit form; forming 1 - y first would cancel badly.
        let z = self.logit_from_base(&self.hidden_base(x), action);
        z.max(0.0) + (-z.abs()).exp().ln_1p() - label * z
    }

    pub fn param_count(&self) -> usize {
        self.w_percept.len() + self.w_action.len() + self.b_hidden.len() + self.w_out.len() + 1
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(&self.w_percept);
        out.extend(&self.w_action);
        out.extend(&self.b_hidden);
        out.extend(&self.w_out);
        out.push(self.b_out);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut rest = params;
        for block in [&mut self.w_percept, &mut self.w_action, &mut self.b_hidden, &mut self.w_out] {
            let (head, tail) = rest.split_at(block.len());
            block.copy_from_slice(head);
            rest = tail;
        }
        self.b_out = rest[0];
    }

    /// Loss gradient with respect to the output logit and the hidden
    /// pre-activations, plus the hidden activations.
    fn backprop(&self, x: &[f64], action: usize, label: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let pre = self.pre_activation(&self.hidden_base(x), action);
        let act: Vec<f64> = pre.iter().map(|&p| softsign(p)).collect();
        let z = self.b_out + act.iter().zip(&self.w_out).map(|(a, w)| a * w).sum::<f64>();
        let dz = sigmoid(z) - label;
        let dpre = (0..self.hidden)
            .map(|j| dz * self.w_out[j] * softsign_grad(pre[j]))
            .collect();
        (dz, dpre, act)
    }

    /// Gradient of [`loss`](Self::loss), flattened in [`params`](Self::params) order.
    pub fn gradient(&self, x: &[f64], action: usize, label: f64) -> Vec<f64> {
        let (h, n_in) = (self.hidden, self.inputs);
        let (dz, dpre, act) = self.backprop(x, action, label);
        let mut grad = vec![0.0; self.param_count()];
        let off_action = h * n_in;
        let off_bias = off_action + self.w_action.len();
        let off_out = off_bias + h;
        for j in 0..h {
            for k in 0..n_in {
                grad[j * n_in + k] = dpre[j] * x[k];
            }
            for &f in &self.codes.active[action] {
                grad[off_action + f * h + j] += dpre[j];
            }
            grad[off_bias + j] = dpre[j];
            grad[off_out + j] = dz * act[j];
        }
        grad[off_out + h] = dz;
        grad
    }

    /// Visits every parameter mutably, in [`params`](Self::params) order.
    fn for_each_param_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let mut i = 0;
        for block in [&mut self.w_percept, &mut self.w_action, &mut self.b_hidden, &mut self.w_out] {
            for p in block.iter_mut() {
                f(i, p);
                i += 1;
            }
        }
        f(i, &mut self.b_out);
    }
}

/// Adam moment estimates. Rarely used action rows keep their own scale, so
/// a long failed trial cannot swamp what the short successful ones taught.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    steps: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    /// One Adam step on `grad` with step size `learning_rate`.
    pub fn step(&mut self, model: &mut UtilityModel, grad: &[f64], learning_rate: f64) {
        if self.m.len() != grad.len() {
            self.m = vec![0.0; grad.len()];
            self.v = vec![0.0; grad.len()];
            self.steps = 0;
        }
        self.steps += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.steps);
        let c2 = 1.0 - Self::BETA2.powi(self.steps);
        let (m, v) = (&mut self.m, &mut self.v);
        model.for_each_param_mut(|i, p| {
            let g = grad[i];
            m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g;
            v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g * g;
            *p -= learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
        });
    }

    pub fn steps(&self) -> i32 {
        self.steps
    }
}

/// Percepts and actions of one trial, plus whether the trial's goal was
/// matched.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryBuffer {
    capacity: usize,
    features: Vec<Vec<f64>>,
    actions: Vec<usize>,
    outcome: Option<bool>,
}

impl TrajectoryBuffer {
    pub fn new(capacity: usize) -> Self {
        TrajectoryBuffer {
            capacity,
            features: Vec::with_capacity(capacity),
            actions: Vec::with_capacity(capacity),
            outcome: None,
        }
    }

    pub fn push(&mut self, features: Vec<f64>, action: usize) {
        assert!(self.actions.len() < self.capacity, "trajectory longer than the trial limit");
        self.features.push(features);
        self.actions.push(action);
    }

    pub fn set_outcome(&mut self, success: bool) {
        self.outcome = Some(success);
    }

    pub fn outcome(&self) -> Option<bool> {
        self.outcome
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.features.iter().map(Vec::as_slice).zip(self.actions.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expert {
    pub goal: GoalId,
    pub model: UtilityModel,
    pub learning_rate: f64,
    pub epsilon: f64,
    /// Utilities within this distance of the best one count as ties.
    #[serde(default)]
    pub tie_tolerance: f64,
    /// Step-size multiplier for samples from failed trials.
    #[serde(default = "unit_weight")]
    pub failure_weight: f64,
    #[serde(default)]
    pub optimizer: Adam,
}

fn unit_weight() -> f64 {
    1.0
}

impl Expert {
    pub fn new(goal: GoalId, inputs: usize, hidden: usize, learning_rate: f64, epsilon: f64, rng: &mut impl Rng) -> Self {
        Expert {
            goal,
            model: UtilityModel::new(inputs, hidden, ActionCodes::factored(), rng),
            learning_rate,
            epsilon,
            tie_tolerance: 0.0,
            failure_weight: 1.0,
            optimizer: Adam::default(),
        }
    }

    pub fn with_tie_tolerance(mut self, tolerance: f64) -> Self {
        self.tie_tolerance = tolerance;
        self
    }

    pub fn with_failure_weight(mut self, weight: f64) -> Self {
        self.failure_weight = weight;
        self
    }

    /// ε-greedy over candidate utilities; ties are broken uniformly.
    pub fn select_action(&self, features: &[f64], epsilon: f64, rng: &mut impl Rng) -> usize {
        if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
            return exploratory_action(rng);
        }
        let logits = self.model.logits(features);
        let ties: Vec<usize> = if self.tie_tolerance > 0.0 {
            let utilities: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
            let best = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..utilities.len()).filter(|&a| utilities[a] >= best - self.tie_tolerance).collect()
        } else {
            let best = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..logits.len()).filter(|&a| logits[a] == best).collect()
        };
        if ties.len() == 1 {
            ties[0]
        } else {
            *ties.choose(rng).expect("at least one action")
        }
    }

    /// One supervised pass over the trial, every step labeled with the trial
    /// outcome. Buffers without samples or outcome are ignored.
    pub fn train(&mut self, buffer: &TrajectoryBuffer) {
        let Some(success) = buffer.outcome() else {
            return;
        };
        let label = if success { 1.0 } else { 0.0 };
        let rate = if success { self.learning_rate } else { self.learning_rate * self.failure_weight };
        for (x, a) in buffer.iter() {
            let grad = self.model.gradient(x, a, label);
            self.optimizer.step(&mut self.model, &grad, rate);
        }
    }
}
