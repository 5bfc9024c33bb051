use super::{ExperimentConfig, ExperimentReport, HarnessError, Scenario};
use crate::chang::counting_leakage;
use crate::chang::protocol::{run_session as chang_session, UserStrategy};
use crate::discrimination::{
    helstrom_error, helstrom_measurement, unambiguous_feasible, Hypothesis,
};
use crate::postprocess::Database;
use crate::quantum::{hermitian_spectrum, trace_norm, PureState, Spectrum, SUPPORT_TOL};
use crate::rng::stream;
use crate::stats::Accumulator;
use crate::yu::attacks::{conclusiveness_pair, run_two_step_attack, TwoStepAttacker};
use crate::yu::protocol::{run_session as yu_session, CheckPolicy, Verdict};
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::time::Instant;

/// Per-trial metrics and verdicts. Verdicts combine with logical AND.
#[derive(Clone, Debug, Default)]
struct Tally {
    metrics: BTreeMap<&'static str, Accumulator>,
    verdicts: BTreeMap<&'static str, bool>,
}

impl Tally {
    fn push(&mut self, name: &'static str, x: f64) {
        self.metrics.entry(name).or_default().push(x);
    }

    fn push_bool(&mut self, name: &'static str, b: bool) {
        self.push(name, if b { 1.0 } else { 0.0 });
    }

    fn push_counts(&mut self, name: &'static str, hits: usize, total: usize) {
        self.metrics
            .entry(name)
            .or_default()
            .merge(&Accumulator::from_counts(hits as u64, total as u64));
    }

    fn verdict(&mut self, name: &'static str, ok: bool) {
        let v = self.verdicts.entry(name).or_insert(true);
        *v &= ok;
    }

    fn merge(&mut self, other: &Tally) {
        for (name, acc) in &other.metrics {
            self.metrics.entry(name).or_default().merge(acc);
        }
        for (name, &ok) in &other.verdicts {
            self.verdict(name, ok);
        }
    }
}

/// State shared read-only by all trials.
struct Context {
    database: Database,
    attacker: Option<TwoStepAttacker>,
}

pub fn run_scenario(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let ctx = Context {
        database: config.load_database()?,
        attacker: match config.scenario {
            Scenario::YuBobTwoStep => Some(TwoStepAttacker::new()?),
            _ => None,
        },
    };

    let mut total = fixed_metrics(config)?;
    let per_trial: Vec<Result<Tally, HarnessError>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, &ctx, trial as u64))
        .collect();
    for t in per_trial {
        total.merge(&t?);
    }

    Ok(ExperimentReport {
        config: config.clone(),
        metrics: total
            .metrics
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.summary()))
            .collect(),
        verdicts: total
            .verdicts
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        seed: config.seed,
        duration_ms: started.elapsed().as_millis() as u64,
    })
}

/// Closed-form quantities reported alongside the Monte Carlo estimates.
fn fixed_metrics(config: &ExperimentConfig) -> Result<Tally, HarnessError> {
    let mut t = Tally::default();
    match config.scenario {
        Scenario::Discriminate => {
            let pair = conclusiveness_pair(0)?;
            let mirror = conclusiveness_pair(1)?;
            t.push("helstrom_error", helstrom_error(&pair));
            t.push("helstrom_error_s1", helstrom_error(&mirror));
            t.push("trace_norm", trace_norm(&pair.weighted_difference())?);
            let (inc, conc) = unambiguous_feasible(pair.first(), pair.second(), SUPPORT_TOL)?;
            t.verdict("unambiguous_feasible_inconclusive", inc);
            t.verdict("unambiguous_feasible_conclusive", conc);
        }
        Scenario::YuBobTwoStep => {
            t.push("helstrom_bound", TwoStepAttacker::new()?.optimal_error());
        }
        Scenario::YuAliceInconclusiveChecks => {
            t.push(
                "expected_post_drop_fraction",
                0.25 / (1.0 - config.check_fraction),
            );
        }
        Scenario::ChangBobCounting => {
            t.push("prior_measured_x", 1.0 - config.eta);
        }
        _ => {}
    }
    Ok(t)
}

fn run_trial(config: &ExperimentConfig, ctx: &Context, trial: u64) -> Result<Tally, HarnessError> {
    let mut rng = stream(config.seed, trial);
    let mut t = Tally::default();
    match config.scenario {
        Scenario::Discriminate => discriminate_trial(config, &mut t, &mut rng)?,
        Scenario::YuHonest => yu_session_trial(config, ctx, CheckPolicy::Honest, &mut t, &mut rng)?,
        Scenario::YuAliceInconclusiveChecks => yu_session_trial(
            config,
            ctx,
            CheckPolicy::CheatInconclusive,
            &mut t,
            &mut rng,
        )?,
        Scenario::YuBobTwoStep => {
            let attacker = ctx
                .attacker
                .as_ref()
                .expect("attacker built for this scenario");
            let run =
                run_two_step_attack(attacker, config.raw_length, config.check_fraction, &mut rng)?;
            t.push_bool("detection_rate", run.detected);
            t.verdict("undetected", !run.detected);
            t.push_counts("guess_error", run.all_round_errors, run.all_round_guesses);
            t.push_counts("guess_error_unchecked", run.guess_errors, run.guesses);
            let (c0, n0) = run.conclusive_by_s[0];
            let (c1, n1) = run.conclusive_by_s[1];
            t.push_counts("conclusive_given_s0", c0, n0);
            t.push_counts("conclusive_given_s1", c1, n1);
            t.push_counts("conclusive_fraction", c0 + c1, n0 + n1);
        }
        Scenario::ChangHonest => {
            chang_session_trial(config, ctx, UserStrategy::Honest, &mut t, &mut rng)?
        }
        Scenario::ChangAliceStoreFake => {
            chang_session_trial(config, ctx, UserStrategy::StoreFake, &mut t, &mut rng)?
        }
        Scenario::ChangBobCounting => {
            let stats =
                counting_leakage(config.group_count, config.group_size, config.eta, &mut rng)?;
            t.metrics.insert("mean_posterior", stats.posterior);
            t.metrics.insert("mean_abs_shift", stats.abs_shift);
            t.metrics.insert("certain_inference_rate", stats.certain_z);
        }
    }
    Ok(t)
}

/// Draws an eigenvector with probability equal to its eigenvalue, i.e. a
/// member of one ensemble realizing the density matrix.
fn sample_pure<R: Rng + ?Sized>(eig: &Spectrum, rng: &mut R) -> PureState {
    let mut u = rng.random::<f64>();
    let last = eig.values.iter().rposition(|&l| l > 0.0).unwrap_or(0);
    for (i, &l) in eig.values.iter().enumerate() {
        if u < l.max(0.0) || i == last {
            return PureState::normalized(eig.vectors.column(i)).expect("unit eigenvector");
        }
        u -= l.max(0.0);
    }
    unreachable!("spectrum is non-empty")
}

fn discriminate_trial<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    t: &mut Tally,
    rng: &mut R,
) -> Result<(), HarnessError> {
    let pair = conclusiveness_pair(0)?;
    let m = helstrom_measurement(&pair);
    let (p_first, _) = pair.priors();
    let spectra = [
        hermitian_spectrum(pair.first().matrix())?,
        hermitian_spectrum(pair.second().matrix())?,
    ];
    let mut errors = 0;
    for _ in 0..config.raw_length {
        let truth = if rng.random::<f64>() < p_first {
            Hypothesis::First
        } else {
            Hypothesis::Second
        };
        let eig = match truth {
            Hypothesis::First => &spectra[0],
            Hypothesis::Second => &spectra[1],
        };
        let state = sample_pure(eig, rng);
        if m.measure(&state, rng) != truth {
            errors += 1;
        }
    }
    t.push_counts("mc_guess_error", errors, config.raw_length);
    Ok(())
}

fn yu_session_trial<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    ctx: &Context,
    policy: CheckPolicy,
    t: &mut Tally,
    rng: &mut R,
) -> Result<(), HarnessError> {
    let params = config.yu_params();
    let out = yu_session(&params, policy, &ctx.database, rng)?;
    let tr = &out.transcript;
    t.push(
        "conclusive_fraction",
        tr.conclusive_count() as f64 / tr.raw_length() as f64,
    );
    t.push(
        "post_drop_conclusive_fraction",
        tr.post_drop_conclusive_fraction(),
    );
    t.push("achieved_check_fraction", out.achieved_check_fraction);
    t.push_bool(
        "check_shortfall",
        tr.checking_positions.len() < params.check_quota(),
    );
    let detected = tr.verdict == Verdict::Fail;
    t.push_bool("detection_rate", detected);
    t.verdict("undetected", !detected);
    t.push("restarts", out.restarts as f64);
    t.push("recovery_fraction", out.recovery_fraction);
    let sound = tr
        .records
        .iter()
        .all(|r| match (r.alice_knowledge.value(), r.bob_bit) {
            (Some(v), Some(b)) => v == b,
            _ => true,
        });
    t.verdict("conclusive_values_sound", sound);
    if let Some(key) = &out.final_key {
        t.push("known_final_bits", key.known_count() as f64);
        t.verdict(
            "known_final_bits_sound",
            key.alice_known.iter().all(|(&j, &v)| key.bits[j] == v),
        );
    }
    if let Some(r) = &out.retrieval {
        t.push_bool("retrieval_correct", r.correct);
        t.verdict("retrievals_correct", r.correct);
    }
    Ok(())
}

fn chang_session_trial<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    ctx: &Context,
    strategy: UserStrategy,
    t: &mut Tally,
    rng: &mut R,
) -> Result<(), HarnessError> {
    let params = config.chang_params();
    let out = chang_session(&params, strategy, &ctx.database, rng)?;
    let det3 = out.step3.deterministic_pass();
    let det4 = out.step4.deterministic_pass();
    t.push_bool("step3_deterministic_pass", det3);
    t.push_bool("step4_deterministic_pass", det4);
    t.push_bool("step3_statistical_pass", out.step3.statistical_pass);
    t.push_bool("step4_statistical_pass", out.step4_statistical_pass);
    t.push_counts(
        "step4_x_announced_rate",
        out.step4.x_announced,
        out.step4.disclosed,
    );
    t.push_bool("detection_rate", !out.checks_passed());
    t.push_counts(
        "groups_failing_step4",
        out.step4.groups_failing,
        out.groups.len(),
    );
    t.verdict("deterministic_checks_passed", det3 && det4);
    t.verdict("undetected", out.checks_passed());
    t.push("restarts", out.restarts as f64);

    let conclusive = out
        .raw_key
        .iter()
        .filter(|kb| kb.alice.is_conclusive())
        .count();
    t.push_counts("conclusive_fraction", conclusive, out.raw_key.len());
    t.push("raw_recovery_fraction", out.raw_recovery_fraction());
    t.push("recovery_fraction", out.recovery_fraction);
    let sound = out
        .raw_key
        .iter()
        .all(|kb| kb.alice.value().is_none_or(|v| v == kb.bob_bit));
    t.verdict("conclusive_values_sound", sound);

    if strategy == UserStrategy::StoreFake {
        let groups = out.groups.len().max(1) as f64;
        t.push("fallbacks_per_group", out.fallbacks() as f64 / groups);
        t.push("infeasible_per_group", out.infeasible() as f64 / groups);
        t.verdict("raw_key_recovered", out.raw_recovery_fraction() == 1.0);
        if out.final_key.is_some() {
            t.push("recovery_fraction_if_completed", out.recovery_fraction);
        }
    }
    if let Some(key) = &out.final_key {
        t.push("known_final_bits", key.known_count() as f64);
    }
    if let Some(r) = &out.retrieval {
        t.push_bool("retrieval_correct", r.correct);
        t.verdict("retrievals_correct", r.correct);
    }
    Ok(())
}
