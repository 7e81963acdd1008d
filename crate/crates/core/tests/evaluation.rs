//! Sweep runner: determinism, pairing, statistics and the rate oracle.

use qaprec::evaluation::{paired_difference, RateReport};
use qaprec::model::{generate_channel, RngSeed, SystemDims, SystemInstance};
use qaprec::precoders::wf_precoder;
use qaprec::qap::SolverConfig;
use qaprec::{run_sweep, sum_rate, Complex64, ComplexMatrix, SchemeId, SweepConfig};

fn config(trials: usize, seed: u64) -> SweepConfig {
    SweepConfig {
        dims: SystemDims::new(4, 2).unwrap(),
        gamma: 1.0,
        snr_points_db: vec![0.0, 15.0],
        levels: 4,
        trials,
        seed,
        schemes: SchemeId::ALL.to_vec(),
        solver: SolverConfig::default(),
    }
}

fn in_pool(threads: usize, cfg: &SweepConfig) -> RateReport {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| run_sweep(cfg)).unwrap()
}

/// `sum_k log2(1 + |g_kk|^2 / (sum_{j != k} |g_kj|^2 + N0))` with `G = H P`, written out.
fn rate_oracle(inst: &SystemInstance, p: &ComplexMatrix) -> f64 {
    let (h, k, m) = (inst.channel(), inst.users(), inst.antennas());
    let mut total = 0.0;
    for row in 0..k {
        let gain = |col: usize| -> f64 {
            let mut z = Complex64::new(0.0, 0.0);
            for a in 0..m {
                z += h.get(row, a) * p.get(a, col);
            }
            z.norm_sqr()
        };
        let interference: f64 = (0..k).filter(|&c| c != row).map(gain).sum();
        total += (1.0 + gain(row) / (interference + inst.noise())).log2();
    }
    total
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let cfg = config(24, 3);
    let one = in_pool(1, &cfg);
    let three = in_pool(3, &cfg);
    assert_eq!(one.to_csv(), three.to_csv());
    assert_eq!(one.to_json(), three.to_json());
}

#[test]
fn all_schemes_see_the_same_channel_draws() {
    let cfg = config(5, 8);
    let report = run_sweep(&cfg).unwrap();
    // Recompute the infinite-resolution WF rate per trial from the documented channel stream.
    let expected: Vec<f64> = (0..cfg.trials as u64)
        .map(|t| {
            let h = generate_channel(cfg.dims, 1.0, RngSeed::new(8, t)).unwrap();
            let inst = SystemInstance::at_snr_db(h, 15.0).unwrap();
            rate_oracle(&inst, wf_precoder(&inst).unwrap().matrix())
        })
        .collect();
    let row = report.row(SchemeId::InfiniteWf, 15.0).unwrap();
    for (got, want) in row.per_trial.iter().zip(&expected) {
        assert!((got.unwrap() - want).abs() < 1e-10);
    }
    let mean = expected.iter().sum::<f64>() / expected.len() as f64;
    assert!((row.mean_sumrate - mean).abs() < 1e-10);
    // Pairing: every scheme reports a value for every trial index.
    for scheme in SchemeId::ALL {
        assert_eq!(report.row(scheme, 15.0).unwrap().per_trial.len(), cfg.trials);
    }
}

#[test]
fn library_rate_matches_the_written_out_formula() {
    for t in 0..20 {
        let h = generate_channel(SystemDims::new(5, 3).unwrap(), 1.0, RngSeed::new(13, t)).unwrap();
        let inst = SystemInstance::at_snr_db(h, t as f64 - 5.0).unwrap();
        let p = wf_precoder(&inst).unwrap();
        assert!((sum_rate(&inst, p.matrix()).unwrap() - rate_oracle(&inst, p.matrix())).abs() < 1e-10);
    }
}

#[test]
fn rate_ignores_per_stream_phase() {
    let h = generate_channel(SystemDims::new(4, 3).unwrap(), 1.0, RngSeed::new(2, 0)).unwrap();
    let inst = SystemInstance::at_snr_db(h, 10.0).unwrap();
    let p = wf_precoder(&inst).unwrap().into_matrix();
    let phases = [0.3, -2.0, 1.1];
    let rotated = ComplexMatrix::from_fn(4, 3, |r, c| p.get(r, c) * Complex64::from_polar(1.0, phases[c])).unwrap();
    let a = sum_rate(&inst, &p).unwrap();
    let b = sum_rate(&inst, &rotated).unwrap();
    assert!((a - b).abs() < 1e-12 * a.max(1.0));
}

#[test]
fn standard_error_shrinks_with_the_square_root_of_trials() {
    let mut cfg = config(100, 21);
    cfg.schemes = vec![SchemeId::InfiniteWf, SchemeId::UnawareWf];
    let small = run_sweep(&cfg).unwrap();
    cfg.trials = 400;
    let large = run_sweep(&cfg).unwrap();
    for scheme in &cfg.schemes {
        for &snr in &cfg.snr_points_db {
            let ratio = small.row(*scheme, snr).unwrap().std_err / large.row(*scheme, snr).unwrap().std_err;
            assert!((ratio / 2.0 - 1.0).abs() <= 0.25, "{scheme} at {snr} dB: ratio {ratio}");
        }
    }
}

#[test]
fn paired_difference_of_a_scheme_with_itself_is_zero() {
    let report = run_sweep(&config(10, 4)).unwrap();
    let row = report.row(SchemeId::AwareWfBeta, 0.0).unwrap();
    let (mean, se, n) = paired_difference(row, row).unwrap();
    assert_eq!((mean, se, n), (0.0, 0.0, 10));
}

#[test]
fn seeds_change_results() {
    let a = run_sweep(&config(6, 1)).unwrap();
    let b = run_sweep(&config(6, 2)).unwrap();
    assert_ne!(a.to_csv(), b.to_csv());
}
