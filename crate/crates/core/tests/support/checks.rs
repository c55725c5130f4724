//! Measurements behind the component-level guarantees. Each returns what
//! it measured so callers decide on the threshold and can report it.

use oel_core::env::CylinderLocation;
use oel_core::experts::{candidates, exploratory_action, ActionCodes, UtilityModel};
use oel_core::motivation::{
    softmax_probabilities, softmax_sample, CompetenceTracker, GoalSelector, MotivationOutcome,
    MotivationSelector, StartStateId, StateSelector,
};
use oel_core::{AgentParams, EnvState, GoalId, Predicate, ScenarioConfig, Tabletop};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest gap between empirical softmax frequencies over `draws` samples
/// and the closed form exp(v/τ) / Σ exp(v/τ), over a few value sets.
pub fn softmax_frequency_error(draws: usize, seed: u64) -> f64 {
    let cases: [(&[f64], f64); 3] = [(&[1.0, 2.0], 1.0), (&[0.5, 0.1, 0.3, 0.0], 0.05), (&[0.0, 0.0, 0.0], 0.2)];
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for (values, tau) in cases {
        let z: f64 = values.iter().map(|v| (v / tau).exp()).sum();
        let exact: Vec<f64> = values.iter().map(|v| (v / tau).exp() / z).collect();
        let computed = softmax_probabilities(values, tau).expect("valid softmax");
        for (c, e) in computed.iter().zip(&exact) {
            worst = worst.max((c - e).abs());
        }
        let mut counts = vec![0usize; values.len()];
        for _ in 0..draws {
            counts[softmax_sample(values, tau, &mut r).expect("valid softmax")] += 1;
        }
        for (c, e) in counts.iter().zip(&exact) {
            worst = worst.max((*c as f64 / draws as f64 - e).abs());
        }
    }
    worst
}

/// v_n = (1-α)^n v_0 + Σ_k α (1-α)^(n-k) x_k, evaluated directly.
fn ema_closed_form(v0: f64, samples: &[f64], alpha: f64) -> f64 {
    let n = samples.len() as i32;
    let decay = 1.0 - alpha;
    decay.powi(n) * v0
        + samples
            .iter()
            .enumerate()
            .map(|(k, x)| alpha * decay.powi(n - 1 - k as i32) * x)
            .sum::<f64>()
}

/// Largest deviation of every running estimate (competence, goal values,
/// the discovery arm, start-state yields) from its closed form after a
/// pseudo-random update stream.
pub fn ema_max_error(seed: u64) -> f64 {
    let p = AgentParams::default();
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let goal = GoalId(0);

    let outcomes: Vec<bool> = (0..200).map(|_| r.gen_bool(0.6)).collect();
    let mut competence = CompetenceTracker::new(p.competence_alpha);
    competence.register(goal);
    let mut deltas = Vec::new();
    for (i, &s) in outcomes.iter().enumerate() {
        let delta = competence.update(goal, s).expect("registered");
        let xs: Vec<f64> = outcomes[..=i].iter().map(|&b| f64::from(u8::from(b))).collect();
        let expected = ema_closed_form(0.0, &xs, p.competence_alpha);
        let previous = ema_closed_form(0.0, &xs[..i], p.competence_alpha);
        worst = worst.max((competence.competence(goal) - expected).abs());
        worst = worst.max((delta - (expected - previous)).abs());
        deltas.push(delta);
    }

    let mut goals = GoalSelector::new(p.goal_alpha, p.goal_temperature, p.goal_prior, false);
    goals.register(goal);
    for (i, &d) in deltas.iter().enumerate() {
        let v = goals.update(goal, d).expect("registered");
        worst = worst.max((v - ema_closed_form(p.goal_prior, &deltas[..=i], p.goal_alpha)).abs());
    }

    let yields: Vec<u32> = (0..200).map(|_| r.gen_range(0..3)).collect();
    let mut motivation = MotivationSelector::new(p.motivation_alpha, p.motivation_temperature);
    let mut states = StateSelector::new(p.state_alpha, p.state_temperature, p.state_prior);
    for (i, &n) in yields.iter().enumerate() {
        let xs: Vec<f64> = yields[..=i].iter().map(|&y| f64::from(y)).collect();
        motivation.update(MotivationOutcome::Discovery { discoveries: n, max_cbim: 0.0 });
        worst = worst.max((motivation.discover_value() - ema_closed_form(0.0, &xs, p.motivation_alpha)).abs());
        let v = states.update(StartStateId::Default, n).expect("default start exists");
        worst = worst.max((v - ema_closed_form(p.state_prior, &xs, p.state_alpha)).abs());
    }
    worst
}

/// Goal bandit fed a stationary competence-improvement stream in which
/// only goal 0 improves (ΔC = 0.1). Returns selection counts per goal.
pub fn bandit_allocation(goals: u32, epochs: usize, seed: u64) -> Vec<usize> {
    let p = AgentParams::default();
    let mut selector = GoalSelector::new(p.goal_alpha, p.goal_temperature, p.goal_prior, p.absolute_cbim);
    for g in 0..goals {
        selector.register(GoalId(g));
    }
    let mut r = rng(seed);
    let mut counts = vec![0usize; goals as usize];
    for _ in 0..epochs {
        let g = selector.select(&mut r).expect("goals registered");
        counts[g.0 as usize] += 1;
        let delta = if g == GoalId(0) { 0.1 } else { 0.0 };
        selector.update(g, delta).expect("registered");
    }
    counts
}

pub fn plurality_to_first(counts: &[usize]) -> bool {
    counts.iter().skip(1).all(|&c| c < counts[0])
}

#[derive(Debug, Default)]
pub struct WalkReport {
    pub steps: usize,
    /// Rising edges of a goal predicate while one of its prerequisites was
    /// false, or while an excluded predicate held.
    pub violations: usize,
    /// Orange-button presses observed while phase 1 was active.
    pub phase1_orange: usize,
    /// Rising edges per scenario goal predicate.
    pub fired: Vec<usize>,
}

/// Uniformly random candidate actions in both phases, restarting every
/// `episode` steps; a third of the episodes begin in phase 0 and switch to
/// phase 1 halfway, so the carried-over scene is searched too.
pub fn dependency_walk(steps: usize, seed: u64) -> WalkReport {
    const EPISODE: usize = 500;
    let config = ScenarioConfig::default_tabletop();
    let table = Tabletop::new(config.clone()).expect("default scenario is valid");
    let predicates: Vec<Predicate> = config.goals.iter().map(|g| g.predicate.clone()).collect();
    let orange = Predicate::Lit("orange".into());
    let mut r = rng(seed);
    let mut report = WalkReport { fired: vec![0; predicates.len()], ..WalkReport::default() };
    let mut env: EnvState = table.init_env(0, seed).expect("phase 0");
    let mut switch_at = None;
    for step in 0..steps {
        if step % EPISODE == 0 {
            let kind = (step / EPISODE) % 3;
            env = table.init_env(u32::from(kind == 1), seed).expect("phase exists");
            switch_at = (kind == 2).then_some(step + EPISODE / 2);
        }
        if switch_at == Some(step) {
            env = table.apply_phase_change(&env, 1).expect("phase 1");
        }
        let phase = config.phase(env.phase).expect("phase exists").clone();
        let before: Vec<bool> = predicates
            .iter()
            .map(|p| table.check_predicate(&env, p).unwrap_or(false))
            .collect();
        let holds = |p: &Predicate| predicates.iter().position(|q| q == p).is_some_and(|i| before[i]);
        let out = table.step(&mut env, candidates()[exploratory_action(&mut r)]);
        report.steps += 1;
        for event in &out.events {
            for (p, rising) in event.signature.post_state() {
                if !rising {
                    continue;
                }
                if let Some(i) = predicates.iter().position(|q| q == p) {
                    report.fired[i] += 1;
                }
                let blocked = phase.prerequisites(p).any(|q| !holds(q)) || phase.excluded_by(p).any(&holds);
                report.violations += usize::from(blocked);
                report.phase1_orange += usize::from(env.phase == 1 && *p == orange);
            }
        }
        debug_assert_eq!(env.holding.is_some(), env.cylinder == CylinderLocation::Held);
    }
    report
}

/// Replays one pseudo-random action sequence twice from the same initial
/// state and compares the full trace of states and percepts as text.
pub fn replay_traces(steps: usize, seed: u64) -> (String, String) {
    let table = Tabletop::new(ScenarioConfig::default_tabletop()).expect("default scenario is valid");
    let trace = || {
        let mut r = rng(seed);
        let mut out = String::new();
        for phase in [0, 1] {
            let mut env = table.init_env(phase, seed).expect("phase exists");
            for _ in 0..steps {
                let step = table.step(&mut env, candidates()[exploratory_action(&mut r)]);
                out.push_str(&format!("{env:?}|{:?}|{:?}\n", step.percept.features(), step.events));
            }
        }
        out
    };
    (trace(), trace())
}

/// Largest relative error between analytic utility-model gradients and a
/// five-point central difference, over random models, inputs and actions.
/// Components below 1e-7 in magnitude are compared absolutely and
/// reported separately.
pub fn gradient_errors(cases: usize, seed: u64) -> (f64, f64) {
    const H: f64 = 1e-4;
    let mut r = rng(seed);
    let (mut rel, mut abs) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < cases {
        let factored = r.gen_bool(0.5);
        let codes = if factored { ActionCodes::factored() } else { ActionCodes::one_hot(candidates().len()) };
        let model = UtilityModel::new(5, 16, codes, &mut r);
        let xs: Vec<f64> = (0..5).map(|_| r.gen_range(-2.0..2.0)).collect();
        let a = r.gen_range(0..candidates().len());
        let label = if r.gen_bool(0.5) { 1.0 } else { 0.0 };
        // softsign' has a kink at 0; the stencil must not straddle it
        let reach = 2.0 * H * (1.0 + xs.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        if model.pre_activations(&xs, a).iter().any(|p| p.abs() <= 2.0 * reach) {
            continue;
        }
        done += 1;
        let grad = model.gradient(&xs, a, label);
        let params = model.params();
        let mut probe = model.clone();
        for i in 0..params.len() {
            let mut at = |k: f64| {
                let mut p = params.clone();
                p[i] += k * H;
                probe.set_params(&p);
                probe.loss(&xs, a, label)
            };
            let numeric = (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * H);
            let scale = numeric.abs().max(grad[i].abs());
            if scale > 1e-7 {
                rel = rel.max((numeric - grad[i]).abs() / scale);
            } else {
                abs = abs.max((numeric - grad[i]).abs());
            }
        }
    }
    (rel, abs)
}
