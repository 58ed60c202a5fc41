#![allow(clippy::needless_range_loop)]

use corerl_core::analytics::metrics::{last_generation, mean_std, window};
use corerl_core::analytics::report::{build_report, generations_csv, load_runs, write_report};
use corerl_core::analytics::stats::{friedman_nemenyi, rank_average, P_CLAMP};
use corerl_core::analytics::*;
use corerl_core::ppo::train::{BestRecord, EpisodeSummary};
use corerl_core::ppo::{HyperParams, RunRecord, RunStatus};
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct FriedmanCase {
    matrix: Vec<Vec<f64>>,
    statistic: f64,
    p_value: f64,
    degenerate: bool,
    nemenyi: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct WilcoxonCase {
    x: Vec<f64>,
    y: Vec<f64>,
    statistic: f64,
    p_value: f64,
}

#[derive(Deserialize)]
struct Ptukey {
    q: f64,
    k: usize,
    sf: f64,
}

#[derive(Deserialize)]
struct Oracle {
    friedman: Vec<FriedmanCase>,
    wilcoxon: Vec<WilcoxonCase>,
    ptukey: Vec<Ptukey>,
}

fn oracle() -> Oracle {
    serde_json::from_str(include_str!("fixtures/stats_oracle.json")).unwrap()
}

#[test]
fn friedman_and_nemenyi_match_reference() {
    let o = oracle();
    assert_eq!(o.friedman.len(), 20);
    assert!(o
        .friedman
        .iter()
        .any(|c| c.matrix.len() == 10 && c.matrix[0].len() == 7));
    for (i, c) in o.friedman.iter().enumerate() {
        let r = friedman_nemenyi(&c.matrix).unwrap();
        assert_eq!(r.degenerate, c.degenerate, "case {i}");
        assert!(
            (r.statistic - c.statistic).abs() < 1e-6 * (1.0 + c.statistic),
            "case {i} stat {} vs {}",
            r.statistic,
            c.statistic
        );
        assert!(
            (r.p_value - c.p_value).abs() < 1e-6,
            "case {i} p {} vs {}",
            r.p_value,
            c.p_value
        );
        let p = r.pairwise.unwrap();
        for a in 0..p.len() {
            for b in 0..p.len() {
                assert!(
                    (p[a][b] - c.nemenyi[a][b]).abs() < 1e-6,
                    "case {i} ({a},{b}) {} vs {}",
                    p[a][b],
                    c.nemenyi[a][b]
                );
            }
        }
    }
}

#[test]
fn all_tied_matrix_is_degenerate() {
    let m = vec![vec![3.0; 7]; 10];
    let r = friedman(&m).unwrap();
    assert!(r.degenerate);
    assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    let p = nemenyi(&m).unwrap();
    for (i, row) in p.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert_eq!(*v, if i == j { 1.0 } else { P_CLAMP.1 });
        }
    }
}

#[test]
fn dominant_column_is_detected() {
    let m: Vec<Vec<f64>> = (0..10)
        .map(|i| vec![i as f64 * 0.1, 0.5 - i as f64 * 0.05, 10.0])
        .collect();
    assert!(friedman(&m).unwrap().p_value < 0.01);
}

#[test]
fn rank_tests_reject_bad_shapes() {
    assert!(friedman(&[vec![1.0, 2.0, 3.0]]).is_err());
    assert!(friedman(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    assert!(friedman(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0]]).is_err());
    assert!(friedman(&[vec![1.0, f64::NAN, 3.0], vec![1.0, 2.0, 3.0]]).is_err());
}

#[test]
fn wilcoxon_matches_reference() {
    for (i, c) in oracle().wilcoxon.iter().enumerate() {
        let r = wilcoxon_greater(&c.x, &c.y).unwrap();
        assert!((r.statistic - c.statistic).abs() < 1e-9, "case {i}");
        assert!(
            (r.p_value - c.p_value).abs() < 1e-6,
            "case {i}: {} vs {}",
            r.p_value,
            c.p_value
        );
    }
}

#[test]
fn studentized_range_matches_reference() {
    for c in oracle().ptukey {
        let v = studentized_range_sf(c.q, c.k);
        assert!(
            (v - c.sf).abs() < 1e-8,
            "q={} k={}: {v} vs {}",
            c.q,
            c.k,
            c.sf
        );
    }
    // k = 2: the range of two normals is |N(0, 2)|.
    let q: f64 = 1.7;
    let want = statrs::function::erf::erfc(q / 2.0);
    assert!(
        (studentized_range_sf(q, 2) - want).abs() < 1e-10,
        "{} vs {want}",
        studentized_range_sf(q, 2)
    );
}

proptest! {
    #[test]
    fn friedman_is_rank_invariant(data in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 4), 3..8)) {
        let a = friedman(&data).unwrap();
        let t: Vec<Vec<f64>> = data.iter().map(|r| r.iter().map(|v| (v / 50.0).exp() * 3.0 + 1.0).collect()).collect();
        let b = friedman(&t).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() < 1e-9);
        let p = nemenyi(&data).unwrap();
        for i in 0..4 {
            prop_assert_eq!(p[i][i], 1.0);
            for j in 0..4 {
                prop_assert_eq!(p[i][j], p[j][i]);
                prop_assert!(p[i][j] >= P_CLAMP.0 && p[i][j] <= 1.0);
            }
        }
    }

    #[test]
    fn nemenyi_p_falls_with_separation(q1 in 0.0f64..6.0, dq in 0.0f64..2.0, k in 3usize..9) {
        prop_assert!(studentized_range_sf(q1 + dq, k) <= studentized_range_sf(q1, k) + 1e-12);
    }
}

#[test]
fn ranks_average_ties() {
    let (r, t) = rank_average(&[3.0, 1.0, 3.0, 2.0]);
    assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
    assert_eq!(t, vec![1, 1, 2]);
}

fn episodes(rewards: &[f64]) -> Vec<EpisodeSummary> {
    rewards
        .iter()
        .enumerate()
        .map(|(i, &r)| EpisodeSummary {
            end_sample: i as u64 + 1,
            length: 1,
            mean_reward: r,
            max_reward: r,
        })
        .collect()
}

fn record(seed: u64, rewards: &[f64]) -> RunRecord {
    let (best_i, best) = rewards
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc },
        );
    RunRecord {
        algorithm: "ppo".into(),
        hyperparams: HyperParams {
            seed,
            ..HyperParams::default()
        },
        environment: serde_json::Value::Null,
        rewards: rewards.to_vec(),
        episodes: episodes(rewards),
        updates: vec![],
        best: BestRecord {
            objective: best,
            samples_at_best: best_i as u64 + 1,
            payload: None,
        },
        total_samples: rewards.len() as u64,
        status: RunStatus::Completed,
    }
}

#[test]
fn generations_split_nf1_budget_evenly() {
    let eps = episodes(&vec![0.5; 40_000]);
    let s = bin_generations(&eps, 100).unwrap();
    assert!(s.episodes.iter().all(|&n| n == 400));
    assert!(s.mean.iter().all(|&m| m == 0.5));
    assert_eq!(*s.samples.last().unwrap(), 40_000);
    assert!(bin_generations(&eps[..50], 100).is_err());
}

proptest! {
    #[test]
    fn generations_conserve_episodes(n in 1usize..500, g in 1usize..60) {
        prop_assume!(n >= g);
        let rewards: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64).collect();
        let s = bin_generations(&episodes(&rewards), g).unwrap();
        prop_assert_eq!(s.episodes.iter().sum::<usize>(), n);
        let (lo, hi) = (s.episodes.iter().min().unwrap(), s.episodes.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
        prop_assert!(s.max_so_far.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(window(n, g, g - 1).end, n);
    }
}

#[test]
fn increasing_rewards_give_increasing_means() {
    let r: Vec<f64> = (0..1000).map(|i| i as f64).collect();
    let s = bin_generations(&episodes(&r), 100).unwrap();
    assert!(s.mean.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn improvement_ratio_and_otp() {
    let mut r = record(0, &[1.0, 2.0, 3.0]);
    assert_eq!(improvement_ratio(&r), 1.0);
    r.total_samples = 40_000;
    r.best.samples_at_best = 1;
    assert_eq!(improvement_ratio(&r), 2.5e-5);
    r.best.samples_at_best = 35_160;
    assert!((improvement_ratio(&r) - 0.879).abs() < 1e-12);
    assert!((otp(-4.556, 40_000).unwrap() - (-1.139e-4)).abs() < 1e-15);
    assert_eq!(otp(0.0, 7).unwrap(), 0.0);
    assert_eq!(otp(-3.0, 1).unwrap(), -3.0);
    assert!(otp(1.0, 0).is_err());
}

#[test]
fn sample_efficiency_pools_last_generation() {
    let a = record(0, &[0.0, 0.0, 1.0, 2.0]);
    let b = record(1, &[0.0, 0.0, 5.0, 6.0]);
    let (m, s) = sample_efficiency(&[&a, &b], 2).unwrap();
    let pooled = [1.0, 2.0, 5.0, 6.0];
    let (want_m, want_s) = mean_std(&pooled);
    assert!((m - 3.5).abs() < 1e-12 && (m - want_m).abs() < 1e-12);
    assert!((s - want_s).abs() < 1e-12);
    assert!((s - (17.0f64 / 4.0).sqrt()).abs() < 1e-12);
    assert_eq!(last_generation(&a.episodes, 2).unwrap(), vec![1.0, 2.0]);
    let c = record(2, &[4.0; 10]);
    assert_eq!(sample_efficiency(&[&c], 5).unwrap(), (4.0, 0.0));
}

fn write_run(dir: &std::path::Path, rec: &RunRecord) {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(
        dir.join("run_record.json"),
        serde_json::to_string(rec).unwrap(),
    )
    .unwrap();
}

#[test]
fn report_over_treatments_and_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("sweep");
    for (t, shift) in [("a", 0.0), ("b", 1.0), ("c", 2.0)] {
        for seed in 0..5u64 {
            let r: Vec<f64> = (0..200)
                .map(|i| shift + (i as f64 + seed as f64).sin() + i as f64 * 0.01)
                .collect();
            write_run(
                &root.join(t).join(format!("seed-{seed}")),
                &record(seed, &r),
            );
        }
    }
    std::fs::create_dir_all(root.join("c/seed-9")).unwrap();
    std::fs::write(root.join("c/seed-9/run_record.json"), "{ not json").unwrap();

    let (runs, warnings) = load_runs(&root).unwrap();
    assert_eq!(runs.len(), 15);
    assert_eq!(warnings.len(), 1);
    let report = build_report(&runs, 100).unwrap();
    assert_eq!(report.summary.len(), 3);
    assert_eq!(report.stats.tests.len(), 2);
    assert!(report
        .stats
        .tests
        .iter()
        .all(|t| t.result.p_value < 0.05 && t.significant));

    let out1 = tmp.path().join("r1");
    let out2 = tmp.path().join("r2");
    write_report(&report, &out1).unwrap();
    let again = build_report(&load_runs(&root).unwrap().0, 100).unwrap();
    write_report(&again, &out2).unwrap();
    for f in ["generations.csv", "summary.json", "stats.json"] {
        assert_eq!(
            std::fs::read(out1.join(f)).unwrap(),
            std::fs::read(out2.join(f)).unwrap(),
            "{f}"
        );
    }
    let csv = std::fs::read_to_string(out1.join("generations.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 15 * 100);
}

#[test]
fn single_run_report_skips_tests() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("one");
    write_run(&root.join("seed-3"), &record(3, &vec![1.0; 300]));
    let (runs, _) = load_runs(&root).unwrap();
    assert_eq!((runs[0].treatment.as_str(), runs[0].seed), ("one", 3));
    let report = build_report(&runs, 100).unwrap();
    assert!(report.stats.tests.is_empty());
    assert!(!report.stats.notices.is_empty());
    let csv = generations_csv(&report.series[0].2).unwrap();
    assert_eq!(csv.lines().count(), 101);
}

#[test]
fn short_runs_renormalize_generations() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("mixed");
    write_run(&root.join("x/seed-0"), &record(0, &vec![1.0; 400]));
    write_run(&root.join("y/seed-0"), &record(0, &vec![1.0; 40]));
    let report = build_report(&load_runs(&root).unwrap().0, 100).unwrap();
    assert_eq!(report.generations, 40);
    assert!(!report.warnings.is_empty());
}
