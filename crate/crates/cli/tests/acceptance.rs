//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run all: `cargo test -p corerl-cli --test acceptance`.
//! Run a subset: `cargo test -p corerl-cli --test acceptance -- 4 5 7`.

#![allow(clippy::needless_range_loop)]
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use corerl_cli::commands::{cmd_train, TrainArgs};
use corerl_core::analytics::metrics::bin_generations;
use corerl_core::analytics::stats::{friedman_nemenyi, wilcoxon_greater, P_CLAMP};
use corerl_core::benchmark::{BenchmarkEnv, BenchmarkFn, BenchmarkSpec};
use corerl_core::env_core::ActionSpec;
use corerl_core::ppo::loss::{ppo_loss, LossConfig};
use corerl_core::ppo::{
    random_search, train, HyperParams, Minibatch, PolicyValueNet, RolloutBuffer, RunRecord,
    TrainOptions,
};
use corerl_core::pwr::decode::decode_slots;
use corerl_core::pwr::economics::{compute_lcoe, FuelClass, LcoeInputs};
use corerl_core::pwr::objective::{objective, ConstraintSpec};
use corerl_core::pwr::surrogate::{AssemblyFom, FomSet};
use corerl_core::pwr::*;
use corerl_core::rng::{rng_from_seed, stream_rng};
use ndarray::Array2;
use rand::Rng as _;
use serde::Deserialize;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn bench_hp(seed: u64, samples: u64) -> HyperParams {
    HyperParams {
        ncores: 8,
        nf: 1,
        n_steps: 4,
        ent_coef: 0.001,
        total_samples: samples,
        seed,
        ..HyperParams::default()
    }
}

fn bench_run(spec: &BenchmarkSpec, hp: &HyperParams) -> RunRecord {
    let s = spec.clone();
    train(
        hp,
        move |_, _| BenchmarkEnv::new(s.clone()),
        &TrainOptions::default(),
    )
    .into_result()
    .expect("benchmark training succeeds")
}

fn generation_means(rec: &RunRecord, n_gen: usize) -> Vec<f64> {
    bin_generations(&rec.episodes, n_gen.min(rec.episodes.len()))
        .unwrap()
        .mean
}

fn c1_global_optimum() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for f in [BenchmarkFn::Sphere, BenchmarkFn::RastriginSr] {
        let mut hits = 0;
        let mut missed = Vec::new();
        for seed in 0..20 {
            let spec = BenchmarkSpec::generate(f, 2, seed).unwrap();
            let target = -spec.eval(&spec.optimum_point()).unwrap();
            let rec = bench_run(&spec, &bench_hp(seed, 10_000));
            if (rec.best.objective - target).abs() < 1e-9 {
                hits += 1;
            } else {
                missed.push(format!(
                    "seed {seed}: {:.4} vs {:.4}",
                    rec.best.objective, target
                ));
            }
        }
        pass &= hits >= 18;
        parts.push(format!(
            "{} {hits}/20 (need >= 18){}",
            f.name(),
            if missed.is_empty() {
                String::new()
            } else {
                format!(" [missed {}]", missed.join("; "))
            }
        ));
    }
    verdict(pass, parts.join("; "))
}

fn c2_nf_ordering() -> Verdict {
    let mut med = Vec::new();
    for nf in [1usize, 25, 100] {
        let finals: Vec<f64> = (0..20)
            .map(|seed| {
                let spec = BenchmarkSpec::generate(BenchmarkFn::Sphere, 2, seed).unwrap();
                let rec = bench_run(
                    &spec,
                    &HyperParams {
                        nf,
                        ..bench_hp(seed, 10_000)
                    },
                );
                *generation_means(&rec, 100).last().unwrap()
            })
            .collect();
        med.push((nf, median(&finals)));
    }
    let pass = med[0].1 > med[1].1 && med[0].1 > med[2].1;
    let detail = med
        .iter()
        .map(|(nf, m)| format!("NF={nf} median final-generation mean {m:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(pass, detail)
}

fn c3_high_entropy() -> Verdict {
    let mut p = Vec::new();
    for ent in [0.1, 0.001] {
        let (mut first, mut last) = (Vec::new(), Vec::new());
        for seed in 0..20 {
            let spec = BenchmarkSpec::generate(BenchmarkFn::RastriginSr, 10, seed).unwrap();
            let rec = bench_run(
                &spec,
                &HyperParams {
                    ent_coef: ent,
                    ..bench_hp(seed, 20_000)
                },
            );
            let g = generation_means(&rec, 100);
            first.push(g[0]);
            last.push(*g.last().unwrap());
        }
        let r = wilcoxon_greater(&last, &first).unwrap();
        let gain: Vec<f64> = last.iter().zip(&first).map(|(l, f)| l - f).collect();
        p.push((ent, r.p_value, median(&gain)));
    }
    let pass = p[0].1 >= 0.05 && p[1].1 < 0.05;
    let detail = p
        .iter()
        .map(|(e, pv, g)| {
            format!("ent_coef={e}: one-sided Wilcoxon p={pv:.3e}, median gain {g:.2}")
        })
        .collect::<Vec<_>>()
        .join("; ");
    verdict(
        pass,
        format!("{detail} (need p >= 0.05 for 0.1 and p < 0.05 for 0.001)"),
    )
}

fn random_instance(seed: u64) -> (PolicyValueNet, Minibatch, LossConfig) {
    let mut rng = stream_rng(seed, 77);
    let obs_len = rng.random_range(1..7);
    let heads: Vec<usize> = (0..rng.random_range(1..4))
        .map(|_| rng.random_range(2..6))
        .collect();
    let spec = ActionSpec::new(heads.clone()).unwrap();
    let net = PolicyValueNet::new(
        obs_len,
        &spec,
        rng.random_range(2..9),
        rng.random_range(1..4),
        &mut rng,
    )
    .unwrap();
    let b = rng.random_range(2..10);
    let obs = Array2::from_shape_fn((b, obs_len), |_| rng.random_range(-2.0..2.0));
    let actions: Vec<Vec<usize>> = (0..b)
        .map(|_| heads.iter().map(|&c| rng.random_range(0..c)).collect())
        .collect();
    let (lp, _, _) = net.evaluate_actions(obs.view(), &actions).unwrap();
    let mb = Minibatch {
        observations: obs,
        old_logprobs: lp.iter().map(|l| l + rng.random_range(-0.5..0.5)).collect(),
        old_values: vec![0.0; b],
        advantages: (0..b).map(|_| rng.random_range(-2.0..2.0)).collect(),
        returns: (0..b).map(|_| rng.random_range(-2.0..2.0)).collect(),
        actions,
    };
    let cfg = LossConfig {
        clip_epsilon: rng.random_range(0.05..0.4),
        ent_coef: rng.random_range(0.0..0.1),
        vf_coef: rng.random_range(0.1..1.5),
        normalize_advantage: rng.random(),
    };
    (net, mb, cfg)
}

fn c4_gradients() -> Verdict {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let (net, mb, cfg) = random_instance(seed);
        let mut g = vec![0.0; net.n_params()];
        ppo_loss(&net, &mb, &cfg, &mut g).unwrap();
        let mut scratch = vec![0.0; net.n_params()];
        let h = 1e-6;
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for k in 0..net.n_params() {
            let mut plus = net.clone();
            plus.params_mut()[k] += h;
            let mut minus = net.clone();
            minus.params_mut()[k] -= h;
            let fd = (ppo_loss(&plus, &mb, &cfg, &mut scratch).unwrap().loss
                - ppo_loss(&minus, &mb, &cfg, &mut scratch).unwrap().loss)
                / (2.0 * h);
            num += (fd - g[k]).powi(2);
            den = den.max(fd * fd).max(g[k] * g[k]);
        }
        let rel = num.sqrt() / den.sqrt().max(1e-12);
        worst = worst.max(rel);
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        worst < 1e-4 && secs < 60.0,
        format!("50 instances, worst relative error {worst:.2e} (need < 1e-4), {secs:.1}s"),
    )
}

fn c5_gae_identity() -> Verdict {
    let mut rng = stream_rng(5, 5);
    let mut cases = 0;
    for _ in 0..200 {
        let (w, n) = (rng.random_range(1..9), rng.random_range(1..9));
        let mut buf = RolloutBuffer::new(w, n, 1);
        for t in 0..n {
            for j in 0..w {
                let r = rng.random_range(-1e3..1e3);
                let v = rng.random_range(-1e3..1e3);
                buf.store(t, j, &[0.0], vec![0], r, v, 0.0, true);
            }
        }
        buf.last_values = (0..w).map(|_| rng.random_range(-1e3..1e3)).collect();
        let mut reference: Option<Vec<f64>> = None;
        for (gamma, lambda) in [
            (0.99, 0.95),
            (0.0, 0.0),
            (1.0, 1.0),
            (0.5, 0.3),
            (rng.random(), rng.random()),
        ] {
            let mut b = buf.clone();
            b.compute_gae(gamma, lambda).unwrap();
            for i in 0..b.len() {
                if b.advantages[i].to_bits() != (b.rewards[i] - b.values[i]).to_bits() {
                    return verdict(
                        false,
                        format!(
                            "advantage {i} is {} not r - V = {}",
                            b.advantages[i],
                            b.rewards[i] - b.values[i]
                        ),
                    );
                }
            }
            match &reference {
                None => reference = Some(b.advantages.clone()),
                Some(r) if r != &b.advantages => {
                    return verdict(
                        false,
                        format!("advantages change with (gamma, lambda) = ({gamma}, {lambda})"),
                    )
                }
                _ => {}
            }
            cases += 1;
        }
    }
    verdict(
        true,
        format!("{cases} buffer/(gamma, lambda) combinations, A = r - V bitwise"),
    )
}

fn c6_objective() -> Verdict {
    let spec = ConstraintSpec::default();
    let f = FomSet {
        cycle_length: 510.0,
        fq: 1.80,
        fdh: 1.40,
        cb: 1100.0,
        pin_peak_bu: 60.0,
        assemblies: vec![AssemblyFom {
            rpf: 1.0,
            fdh: 1.4,
            eoc_exposure: 40.0,
        }],
    };
    let mut errs = Vec::new();
    for (lcoe, want) in [(5.569, -4.569), (5.529, -4.529)] {
        let b = objective(&f, (2, 3), lcoe, &spec);
        errs.push(if b.feasible {
            (b.objective - want).abs()
        } else {
            f64::INFINITY
        });
    }
    // Feasible designs found by the environment obey the same relation exactly.
    let m = Arc::new(PwrModel::default_model());
    let aspec = action_spec(&m.geometry, &m.catalog, &m.inventory).unwrap();
    let mut env = PwrEnv::new(m.clone(), rng_from_seed(0), None).unwrap();
    let mut rng = stream_rng(6, 6);
    let mut feasible = 0;
    let mut exact = true;
    for _ in 0..20_000 {
        let e = env
            .evaluate_pattern(&aspec.sample_uniform(&mut rng))
            .unwrap();
        if e.breakdown.feasible {
            feasible += 1;
            exact &= e.breakdown.objective == 1.0 - e.breakdown.lcoe && e.breakdown.penalty == 0.0;
        }
    }
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    verdict(
        worst < 1e-12 && exact,
        format!("5.569 -> -4.569 and 5.529 -> -4.529 within {worst:.1e} (need < 1e-12); {feasible} feasible surrogate designs all exactly 1 - LCOE: {exact}"),
    )
}

#[derive(Deserialize)]
struct LcoeCase {
    inputs: LcoeInputs,
    classes: Vec<FuelClass>,
    lcoe: String,
}

#[derive(Deserialize)]
struct LcoeOracle {
    cases: Vec<LcoeCase>,
}

fn fixture(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn c7_lcoe() -> Verdict {
    let o: LcoeOracle = serde_json::from_str(&fixture("lcoe_oracle.json")).unwrap();
    let mut worst: f64 = 0.0;
    for c in &o.cases {
        let want: f64 = c.lcoe.parse().unwrap();
        let got = compute_lcoe(&c.inputs, &c.classes).unwrap();
        worst = worst.max((got - want).abs() / want.abs());
    }
    let mut worst_r0: f64 = 0.0;
    for c in o.cases.iter().take(20) {
        let mut zero = c.inputs;
        zero.discount_rate = 0.0;
        let mut near = c.inputs;
        near.discount_rate = 1e-9;
        let a = compute_lcoe(&zero, &c.classes).unwrap();
        let b = compute_lcoe(&near, &c.classes).unwrap();
        worst_r0 = worst_r0.max((a - b).abs() / a.abs());
    }
    verdict(
        o.cases.len() == 100 && worst < 1e-10 && worst_r0 < 1e-6,
        format!("{} cases, worst relative error {worst:.2e} (need < 1e-10); r -> 0 continuity {worst_r0:.2e} (need < 1e-6)", o.cases.len()),
    )
}

fn c8_decoder() -> Verdict {
    let m = PwrModel::default_model();
    let spec = action_spec(&m.geometry, &m.catalog, &m.inventory).unwrap();
    let card = spec.cardinalities().to_vec();
    let waba: Vec<usize> = (0..m.catalog.len())
        .filter(|&t| m.catalog.get(t).has_waba())
        .collect();
    let mut rng = stream_rng(8, 8);
    let adversarial_seeds = [
        0u64,
        1,
        u64::MAX,
        u64::MAX - 1,
        1 << 63,
        0x5555_5555_5555_5555,
        0xAAAA_AAAA_AAAA_AAAA,
    ];
    let mut violations = 0;
    let mut replaced_total = 0;
    for i in 0..10_000usize {
        let a: Vec<usize> = match i % 5 {
            0 | 1 => spec.sample_uniform(&mut rng),
            // Extremes of every component.
            2 => card
                .iter()
                .map(|&c| if rng.random() { 0 } else { c - 1 })
                .collect(),
            // Every fresh location asks for a WABA type, forcing replacements on CRD locations.
            3 => card
                .iter()
                .enumerate()
                .map(|(l, &c)| {
                    if m.geometry.locations()[l].class == BurnClass::Fresh {
                        waba[rng.random_range(0..waba.len())]
                    } else {
                        rng.random_range(0..c)
                    }
                })
                .collect(),
            _ => card.iter().map(|&c| c - 1).collect(),
        };
        let seed = if i % 2 == 0 {
            adversarial_seeds[i % adversarial_seeds.len()]
        } else {
            rng.random()
        };
        let (slots, replaced) = match decode_slots(
            &a,
            &m.geometry,
            &m.catalog,
            &m.inventory,
            &mut rng_from_seed(seed),
        ) {
            Ok(x) => x,
            Err(_) => {
                violations += 1;
                continue;
            }
        };
        replaced_total += replaced;
        let p = LoadingPattern::from_slots(&slots, m.inventory.center_type(), &m.geometry);
        violations += check_structural(&p, &m.geometry, &m.catalog, &m.inventory).len();
    }
    verdict(
        violations == 0,
        format!(
            "10000 actions, {violations} violations, {replaced_total} WABA replacements exercised"
        ),
    )
}

#[derive(Deserialize)]
struct FriedmanCase {
    matrix: Vec<Vec<f64>>,
    statistic: f64,
    p_value: f64,
    degenerate: bool,
    nemenyi: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct StatsOracle {
    friedman: Vec<FriedmanCase>,
}

fn c9_stats() -> Verdict {
    let o: StatsOracle = serde_json::from_str(&fixture("stats_oracle.json")).unwrap();
    let mut worst: f64 = 0.0;
    let mut flags_ok = true;
    for c in &o.friedman {
        let r = friedman_nemenyi(&c.matrix).unwrap();
        flags_ok &= r.degenerate == c.degenerate;
        worst = worst.max((r.statistic - c.statistic).abs() / (1.0 + c.statistic.abs()));
        worst = worst.max((r.p_value - c.p_value).abs());
        for (row, want) in r.pairwise.unwrap().iter().zip(&c.nemenyi) {
            for (a, b) in row.iter().zip(want) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let has_nf_shape = o
        .friedman
        .iter()
        .any(|c| c.matrix.len() == 10 && c.matrix[0].len() == 7);
    let tied = friedman_nemenyi(&vec![vec![1.5; 7]; 10]).unwrap();
    let clamp_ok = tied.p_value == 1.0
        && tied.degenerate
        && tied.pairwise.unwrap().iter().enumerate().all(|(i, row)| {
            row.iter()
                .enumerate()
                .all(|(j, &v)| v == if i == j { 1.0 } else { P_CLAMP.1 })
        });
    verdict(
        o.friedman.len() == 20 && has_nf_shape && worst < 1e-6 && flags_ok && clamp_ok,
        format!("{} matrices (10x7 included: {has_nf_shape}), worst deviation {worst:.2e} (need < 1e-6); all-tied p = 1 with upper clamp: {clamp_ok}", o.friedman.len()),
    )
}

fn c10_determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("pwr.json");
    let data = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .canonicalize()
        .unwrap();
    let doc = serde_json::json!({
        "schema_version": 1,
        "name": "determinism",
        "environment": {"kind": "pwr", "geometry": data.join("geometry.json"), "catalog": data.join("catalog.json"),
                        "inventory": data.join("inventory.json"), "economics": data.join("economics.json")},
        "hyperparams": {"ncores": 8, "total_samples": 2000},
        "generations": 20
    });
    std::fs::write(&cfg, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    let outs = [tmp.path().join("a"), tmp.path().join("b")];
    for out in &outs {
        if let Err(e) = cmd_train(&TrainArgs {
            config: cfg.clone(),
            seed: Some(7),
            out: out.clone(),
            max_seconds: None,
        }) {
            return verdict(false, format!("train failed: {e}"));
        }
    }
    let files = [
        "config.json",
        "seed-7/run_record.json",
        "seed-7/generations.csv",
        "seed-7/best_design.json",
        "report/generations.csv",
        "report/summary.json",
        "report/stats.json",
    ];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| {
            std::fs::read(outs[0].join(f)).ok() != std::fs::read(outs[1].join(f)).ok()
                || !outs[0].join(f).is_file()
        })
        .collect();
    verdict(
        differing.is_empty(),
        format!(
            "{} artifacts compared (manifest timestamps excluded), differing: {differing:?}",
            files.len()
        ),
    )
}

fn c11_rl_vs_random() -> Verdict {
    let model = Arc::new(PwrModel::default_model());
    let (mut ppo, mut rnd) = (Vec::new(), Vec::new());
    for seed in 0..10 {
        let hp = HyperParams {
            total_samples: 10_000,
            seed,
            ..HyperParams::default()
        };
        let m = model.clone();
        let make = move |_: usize, s: u64| PwrEnv::new(m.clone(), rng_from_seed(s), None);
        ppo.push(
            train(&hp, &make, &TrainOptions::default())
                .into_result()
                .unwrap()
                .best
                .objective,
        );
        rnd.push(
            random_search(&hp, &make, &TrainOptions::default())
                .into_result()
                .unwrap()
                .best
                .objective,
        );
    }
    let (a, b) = (median(&ppo), median(&rnd));
    let wins = ppo.iter().zip(&rnd).filter(|(p, r)| p > r).count();
    verdict(a > b, format!("median best PPO {a:.4} vs random {b:.4} over 10 seeds at 10000 samples (PPO better on {wins}/10 seeds)"))
}

type Criterion = (usize, &'static str, fn() -> Verdict);

fn main() {
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [Criterion; 11] = [
        (
            1,
            "benchmark global optimum (sphere, rastrigin_sr; nx=2)",
            c1_global_optimum,
        ),
        (2, "NF=1 beats NF=25 and NF=100 on sphere", c2_nf_ordering),
        (
            3,
            "high ent_coef stalls, low ent_coef learns (rastrigin_sr, nx=10)",
            c3_high_entropy,
        ),
        (4, "loss gradients match central differences", c4_gradients),
        (
            5,
            "single-step episodes give A = r - V for any (gamma, lambda)",
            c5_gae_identity,
        ),
        (6, "feasible objective equals 1 - LCOE", c6_objective),
        (7, "LCOE matches extended-precision reference", c7_lcoe),
        (
            8,
            "decoded patterns satisfy all structural rules",
            c8_decoder,
        ),
        (9, "Friedman/Nemenyi match reference values", c9_stats),
        (10, "train is byte-for-byte reproducible", c10_determinism),
        (
            11,
            "PPO beats uniform random search on the PWR surrogate",
            c11_rl_vs_random,
        ),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let v = check();
        failed += !v.pass as usize;
        println!(
            "{} criterion {n}: {name} — {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
