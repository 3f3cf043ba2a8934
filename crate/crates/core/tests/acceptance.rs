//! Acceptance suite. Runs every criterion in sequence (so wall-time ratios are
//! not disturbed by concurrent tests) and prints one PASS/FAIL line each.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::Instant;

use hybf::channel::{generate_scenario, ChannelSet, ScenarioParams};
use hybf::composition::{mb_sbc, sb_sbc, CompositionVariant};
use hybf::gradproj::{armijo_step, gp_optimize, GpConfig};
use hybf::harness::{quantile, run_experiment, ExperimentSpec, ResultRecord, TrialCounts};
use hybf::methods::Method;
use hybf::objective::{network_utility, utility_gradient, utility_nats, BeamMatrix};
use hybf::projection::{feasibility_margin, project_to_papc, FEASIBILITY_TOL};
use hybf::sdr::{solve_relaxed, SdrConfig};
use hybf::{Complex, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C64 = Complex<f64>;
type CMatrix = DMatrix<C64>;

const TRIALS: [usize; 4] = [1, 10, 100, 1000];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, l: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(m, l, |_, _| C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)))
}

/// Uniform-ish feasible point: every row drawn in its ball of radius 1/√M.
fn random_feasible(rng: &mut ChaCha8Rng, m: usize, l: usize) -> CMatrix {
    let mut w = random_matrix(rng, m, l, 1.0);
    let cap = (1.0 / m as f64).sqrt();
    for r in 0..m {
        let norm = w.row(r).norm();
        let radius = cap * rng.gen::<f64>().powf(1.0 / (2 * l) as f64);
        for z in w.row_mut(r).iter_mut() {
            *z *= radius / norm;
        }
    }
    w
}

fn row_rule(w: &CMatrix) -> CMatrix {
    let m = w.nrows();
    let cap = 1.0 / (m as f64).sqrt();
    let mut out = w.clone();
    for r in 0..m {
        let norm = w.row(r).norm();
        if norm > cap {
            for z in out.row_mut(r).iter_mut() {
                *z *= cap / norm;
            }
        }
    }
    out
}

fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn criterion_1() -> Result<Verdict> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut rule_err, mut idem_err, mut expansion, mut phase_err) = (0.0f64, 0.0f64, f64::NEG_INFINITY, 0.0f64);
    for _ in 0..10_000 {
        let m = rng.gen_range(1..=8);
        let l = rng.gen_range(1..=4);
        let scale = [0.05, 0.5, 3.0][rng.gen_range(0..3)];
        let a = random_matrix(&mut rng, m, l, scale);
        let b = random_matrix(&mut rng, m, l, scale);
        let pa = project_to_papc(&a)?.into_matrix();
        let pb = project_to_papc(&b)?.into_matrix();
        rule_err = rule_err.max(max_abs(&(&pa - row_rule(&a))));
        idem_err = idem_err.max(max_abs(&(project_to_papc(&pa)?.into_matrix() - &pa)));
        expansion = expansion.max((&pa - &pb).norm() - (&a - &b).norm());
        for (x, y) in a.iter().zip(pa.iter()) {
            // y = c x with c > 0 real.
            let c = y * x.conj();
            phase_err = phase_err.max(c.im.abs() / x.norm_sqr().max(1e-300) + (-c.re).max(0.0));
        }
    }
    let mut beaten = 0;
    let instances = 12;
    for _ in 0..instances {
        let m = rng.gen_range(1..=3);
        let l = rng.gen_range(1..=4);
        let a = random_matrix(&mut rng, m, l, 2.0);
        let d = (project_to_papc(&a)?.into_matrix() - &a).norm();
        let best = (0..100_000)
            .map(|_| (random_feasible(&mut rng, m, l) - &a).norm())
            .fold(f64::INFINITY, f64::min);
        if d <= best {
            beaten += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = rule_err <= 1e-15
        && idem_err <= 1e-15
        && expansion <= 1e-12
        && phase_err <= 1e-12
        && beaten == instances
        && secs < 10.0;
    Ok(verdict(
        pass,
        format!(
            "rule {rule_err:.1e}, idempotence {idem_err:.1e}, expansion {expansion:.1e}, phase {phase_err:.1e}, \
             beats sampling {beaten}/{instances}, {secs:.2} s"
        ),
    ))
}

fn one_hotspot_two_sections(seed: u64) -> Result<ChannelSet> {
    let sc = generate_scenario(&ScenarioParams { num_hotspots: 1, seed, ..Default::default() })?;
    let mut channels = ChannelSet::from_scenario(&sc);
    channels.sections.push(Vec::new());
    Ok(channels)
}

fn criterion_2() -> Result<Verdict> {
    let start = Instant::now();
    let eps = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut pairs) = (0.0f64, 0);
    for l in [1, 2] {
        for k in [1, 4, 16] {
            for p in 0..20u64 {
                let seed = 1000 * k as u64 + 100 * l as u64 + p;
                let channels = if k < l {
                    one_hotspot_two_sections(seed)?
                } else {
                    let sc = generate_scenario(&ScenarioParams { num_hotspots: k, num_sections: l, seed, ..Default::default() })?;
                    ChannelSet::from_scenario(&sc)
                };
                assert_eq!(channels.num_elements, 48);
                let w = BeamMatrix::new(random_feasible(&mut rng, 48, l));
                let delta = random_matrix(&mut rng, 48, l, 1.0 / 48f64.sqrt());
                let g = utility_gradient(&w, &channels);
                let analytic = 2.0 * g.iter().zip(delta.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
                let plus = BeamMatrix::new(w.as_matrix() + &delta * C64::new(eps, 0.0));
                let minus = BeamMatrix::new(w.as_matrix() - &delta * C64::new(eps, 0.0));
                let fd = (utility_nats(&plus, &channels) - utility_nats(&minus, &channels)) / (2.0 * eps);
                worst = worst.max((fd - analytic).abs() / analytic.abs().max(1e-12));
                pairs += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(verdict(
        worst < 1e-6 && pairs >= 100 && secs < 30.0,
        format!("{pairs} pairs, worst relative error {worst:.2e}, {secs:.2} s"),
    ))
}

fn criterion_3() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut sbc_gap, mut ub_gap, mut gp_gap, mut all_rank_one) = (0.0f64, 0.0f64, 0.0f64, true);
    for seed in 0..20u64 {
        let sc = generate_scenario(&ScenarioParams { num_hotspots: 1, seed, ..Default::default() })?;
        let channels = ChannelSet::from_scenario(&sc);
        let link = &channels.sections[0][0];
        let m = channels.num_elements as f64;
        let exact = (1.0 + link.gamma * m).log2();
        let sbc = network_utility(&BeamMatrix::from_column(&sb_sbc(&channels.sections[0])?), &channels)?.utility_bits;
        let relaxed = solve_relaxed(&channels.sections[0], &SdrConfig::default())?;
        sbc_gap = sbc_gap.max((sbc - exact).abs() / exact);
        ub_gap = ub_gap.max((relaxed.upper_bound_bits() - exact).abs() / exact);
        all_rank_one &= relaxed.rank_one;
        for _ in 0..5 {
            let init = BeamMatrix::new(random_feasible(&mut rng, 48, 1));
            let (w, _) = gp_optimize(&init, &channels, &GpConfig::default())?;
            gp_gap = gp_gap.max((network_utility(&w, &channels)?.utility_bits - exact).abs());
        }
    }
    Ok(verdict(
        sbc_gap < 1e-5 && ub_gap < 1e-5 && all_rank_one && gp_gap < 1e-4,
        format!(
            "SBC rel gap {sbc_gap:.1e}, UB rel gap {ub_gap:.1e}, rank one {all_rank_one}, GP worst {gp_gap:.1e} bits"
        ),
    ))
}

/// Records of the single-beam study at one K, 200 realizations.
fn single_beam_study(k: usize) -> Result<Vec<ResultRecord>> {
    run_experiment(&ExperimentSpec {
        scenario_params: ScenarioParams { num_hotspots: k, ..Default::default() },
        methods: vec![Method::SbSbc, Method::SbPosbc, Method::SdrR, Method::Gp, Method::Ub],
        num_realizations: 200,
        n_trial: TrialCounts::Shared(TRIALS.to_vec()),
        master_seed: 2024 + k as u64,
        workers: 1,
        ..Default::default()
    })
}

fn utility_map(records: &[ResultRecord]) -> BTreeMap<(usize, Method, Option<usize>), f64> {
    records
        .iter()
        .map(|r| ((r.realization_id, r.method, r.n_trial), r.utility_bits.unwrap_or(f64::NAN)))
        .collect()
}

fn mean_of(records: &[ResultRecord], method: Method, n_trial: Option<usize>, realizations: usize, time: bool) -> f64 {
    let xs: Vec<f64> = records
        .iter()
        .filter(|r| r.method == method && r.n_trial == n_trial && r.realization_id < realizations)
        .map(|r| if time { r.wall_time_seconds } else { r.utility_bits.unwrap_or(f64::NAN) })
        .collect();
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn criterion_4(studies: &[(usize, Vec<ResultRecord>)]) -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    let mut failures = 0;
    for (_, records) in studies {
        failures += records.iter().filter(|r| r.failed()).count();
        let map = utility_map(records);
        for r in records.iter().filter(|r| r.method != Method::Ub) {
            let ub = map[&(r.realization_id, Method::Ub, None)];
            worst = worst.max(r.utility_bits.unwrap_or(f64::NAN) - ub);
            checked += 1;
        }
    }
    verdict(
        failures == 0 && worst <= 1e-6,
        format!("{checked} runs, largest excess over UB {worst:.2e} bits, {failures} failed"),
    )
}

fn within(value: f64, target: f64, band: f64) -> bool {
    (value - target).abs() <= band * target
}

fn criterion_5(studies: &[(usize, Vec<ResultRecord>)]) -> Verdict {
    let targets = [(4, [5.627, 5.611, 5.783]), (16, [4.498, 4.585, 4.715])];
    let mut pass = true;
    let mut parts = Vec::new();
    for ((k, records), (_, t)) in studies.iter().zip(targets) {
        for (method, n, target) in [
            (Method::SbPosbc, Some(1000), t[0]),
            (Method::SdrR, Some(1000), t[1]),
            (Method::Ub, None, t[2]),
        ] {
            let mean = mean_of(records, method, n, 100, false);
            let ok = within(mean, target, 0.05);
            pass &= ok;
            parts.push(format!("K={k} {method} {mean:.3}/{target} ({:+.1}%){}", 100.0 * (mean / target - 1.0), if ok { "" } else { "!" }));
        }
    }
    verdict(pass, parts.join(", "))
}

fn criterion_6(studies: &[(usize, Vec<ResultRecord>)]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, records) in studies {
        for method in [Method::SbPosbc, Method::SdrR] {
            let means: Vec<f64> = TRIALS.iter().map(|&n| mean_of(records, method, Some(n), 100, false)).collect();
            let ok = means.windows(2).all(|w| w[1] >= w[0]);
            pass &= ok;
            let shown: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
            parts.push(format!("K={k} {method} [{}]", shown.join(" ")));
        }
    }
    verdict(pass, parts.join(", "))
}

/// Replays gradient projection step by step, checking every iterate.
fn replay_gp(channels: &ChannelSet, cfg: &GpConfig) -> Result<(bool, bool, f64)> {
    let init = mb_sbc(channels, CompositionVariant::Plain)?.beams;
    let (expected, _) = gp_optimize(&init, channels, cfg)?;
    let mut w = init;
    let mut u = utility_nats(&w, channels);
    let (mut monotone, mut feasible) = (true, feasibility_margin(&w) <= FEASIBILITY_TOL);
    for _ in 0..cfg.max_iters {
        let g = utility_gradient(&w, channels);
        let step = armijo_step(&w, &g, u, channels, cfg)?;
        monotone &= step.utility >= u;
        feasible &= feasibility_margin(&step.next) <= FEASIBILITY_TOL;
        let err = (step.next.as_matrix() - w.as_matrix()).norm();
        w = step.next;
        u = step.utility;
        if err <= cfg.epsilon {
            break;
        }
    }
    let same = w == expected;
    Ok((monotone && same, feasible, u / LN_2))
}

fn criterion_7(studies: &[(usize, Vec<ResultRecord>)]) -> Result<Verdict> {
    let targets = [(4, 5.541), (16, 4.958)];
    let cfg = GpConfig::default();
    let (mut monotone, mut feasible, mut pass) = (true, true, true);
    let mut parts = Vec::new();
    for ((k, records), (_, target)) in studies.iter().zip(targets) {
        let spec = ExperimentSpec { master_seed: 2024 + *k as u64, ..Default::default() };
        for r in 0..100 {
            let sc = generate_scenario(&ScenarioParams { num_hotspots: *k, seed: spec.realization_seed(r), ..Default::default() })?;
            let channels = ChannelSet::from_scenario(&sc).merged();
            let (mono, feas, _) = replay_gp(&channels, &cfg)?;
            monotone &= mono;
            feasible &= feas;
        }
        let mean = mean_of(records, Method::Gp, None, 100, false);
        let ok = within(mean, target, 0.05);
        pass &= ok;
        parts.push(format!("K={k} GP {mean:.3}/{target} ({:+.1}%)", 100.0 * (mean / target - 1.0)));
    }
    Ok(verdict(
        pass && monotone && feasible,
        format!("monotone {monotone}, feasible {feasible}, {}", parts.join(", ")),
    ))
}

fn criterion_8(studies: &[(usize, Vec<ResultRecord>)]) -> Verdict {
    let records = &studies[0].1;
    let sdr = mean_of(records, Method::SdrR, Some(1000), 100, true);
    let posbc = mean_of(records, Method::SbPosbc, Some(1000), 100, true);
    let gp = mean_of(records, Method::Gp, None, 100, true);
    verdict(
        sdr > 20.0 * posbc && sdr > 20.0 * gp,
        format!(
            "K=4 mean times SDR-R {:.1} ms, SB-POSBC {:.1} ms, GP {:.1} ms (ratios {:.1}x, {:.1}x)",
            1e3 * sdr,
            1e3 * posbc,
            1e3 * gp,
            sdr / posbc,
            sdr / gp
        ),
    )
}

fn criterion_9() -> Result<Verdict> {
    let records = run_experiment(&ExperimentSpec {
        scenario_params: ScenarioParams { num_hotspots: 8, num_sections: 2, ..Default::default() },
        methods: vec![Method::SdrR, Method::MbSbc, Method::MbGp],
        num_realizations: 500,
        n_trial: TrialCounts::Shared(vec![1000]),
        master_seed: 4000,
        ..Default::default()
    })?;
    let values = |m: Method| -> Vec<f64> {
        records.iter().filter(|r| r.method == m).filter_map(|r| r.utility_bits).collect()
    };
    let (sdr, sbc, gp) = (values(Method::SdrR), values(Method::MbSbc), values(Method::MbGp));
    let failures = records.iter().filter(|r| r.failed()).count();
    let ratio = quantile(&gp, 0.5)? / quantile(&sdr, 0.5)?;
    let mut dominates = true;
    for i in 1..100 {
        let p = i as f64 / 100.0;
        dominates &= quantile(&gp, p)? > quantile(&sbc, p)?;
    }
    Ok(verdict(
        failures == 0 && (1.7..=2.3).contains(&ratio) && dominates,
        format!(
            "{} realizations, median MB-GP {:.3} / SDR-R {:.3} = {ratio:.3}, MB-GP above MB-SBC at all percentiles {dominates}",
            gp.len(),
            quantile(&gp, 0.5)?,
            quantile(&sdr, 0.5)?
        ),
    ))
}

fn criterion_10() -> Result<Verdict> {
    let spec = ExperimentSpec {
        scenario_params: ScenarioParams { num_hotspots: 6, num_sections: 2, ..Default::default() },
        methods: Method::ALL.to_vec(),
        num_realizations: 6,
        n_trial: TrialCounts::Shared(vec![1, 50]),
        master_seed: 77,
        ..Default::default()
    };
    let bits = |recs: &[ResultRecord]| -> Vec<Option<u64>> {
        recs.iter().map(|r| r.utility_bits.map(f64::to_bits)).collect()
    };
    let a = run_experiment(&ExperimentSpec { workers: 1, ..spec.clone() })?;
    let b = run_experiment(&ExperimentSpec { workers: 3, ..spec.clone() })?;
    let c = run_experiment(&spec)?;
    let same = bits(&a) == bits(&b) && bits(&a) == bits(&c) && a.iter().all(|r| !r.failed());
    Ok(verdict(same, format!("{} utilities identical across 3 reruns: {same}", a.len())))
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Result<Verdict>)> = Vec::new();
    let mut report = |n: usize, name: &'static str, v: Result<Verdict>| {
        match &v {
            Ok(v) => println!("criterion {n:>2} {name}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail),
            Err(e) => println!("criterion {n:>2} {name}: FAIL (error: {e})"),
        }
        results.push((n, name, v));
    };
    report(1, "projection", criterion_1());
    report(2, "gradient", criterion_2());
    report(3, "single-hotspot chain", criterion_3());
    let t = Instant::now();
    let studies: Result<Vec<(usize, Vec<ResultRecord>)>> =
        [4, 16].into_iter().map(|k| single_beam_study(k).map(|r| (k, r))).collect();
    eprintln!("single-beam studies: {:.1} s", t.elapsed().as_secs_f64());
    match &studies {
        Ok(s) => {
            report(4, "upper-bound dominance", Ok(criterion_4(s)));
            report(5, "utility means", Ok(criterion_5(s)));
            report(6, "trial-count trend", Ok(criterion_6(s)));
            report(7, "gradient projection", criterion_7(s));
            report(8, "runtime ordering", Ok(criterion_8(s)));
        }
        Err(e) => {
            for (n, name) in [(4, "upper-bound dominance"), (5, "utility means"), (6, "trial-count trend"), (7, "gradient projection"), (8, "runtime ordering")] {
                report(n, name, Err(hybf::HybfError::InvalidInput(format!("study failed: {e}"))));
            }
        }
    }
    report(9, "double-beam gain", criterion_9());
    report(10, "determinism", criterion_10());
    let failed: Vec<usize> = results
        .iter()
        .filter(|(_, _, v)| !matches!(v, Ok(Verdict { pass: true, .. })))
        .map(|(n, _, _)| *n)
        .collect();
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
