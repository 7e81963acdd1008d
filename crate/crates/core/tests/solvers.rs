//! Exact solvers against exhaustive enumeration, plus the structural guarantees
//! every returned solution must satisfy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qaprec::model::{generate_channel, RngSeed, SystemDims, SystemInstance};
use qaprec::precoders::{beta_wf, precoder_quantizer, quantization_unaware_precoder, wf_precoder};
use qaprec::qap::{
    branch_and_bound, brute_force_solve, build_real_program, decomposed_search, embed_precoder,
    quantization_aware_precoder, solve, RealQuadraticProgram, SolveDump, SolveResult, SolveStatus, SolverConfig,
    SolverStrategy,
};
use qaprec::quantizer::quantize_complex_matrix;

fn instance(m: usize, k: usize, snr_db: f64, seed: u64, stream: u64) -> SystemInstance {
    let channel = generate_channel(SystemDims::new(m, k).unwrap(), 1.0, RngSeed::new(seed, stream)).unwrap();
    SystemInstance::at_snr_db(channel, snr_db).unwrap()
}

fn program(inst: &SystemInstance, levels: usize) -> RealQuadraticProgram {
    let spec = precoder_quantizer(inst, levels).unwrap();
    build_real_program(inst, beta_wf(inst).unwrap(), &spec).unwrap()
}

/// Small random programs whose lattice has at most 65536 points.
fn small_programs(count: usize, seed: u64) -> Vec<RealQuadraticProgram> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let m = rng.random_range(1..=4);
        let k = rng.random_range(1..=3);
        let levels = rng.random_range(2..=6);
        let n = 2 * m * k;
        if (levels as f64).powi(n as i32) > 65536.0 {
            continue;
        }
        let inst = instance(m, k, rng.random_range(-10.0..30.0), seed, out.len() as u64);
        out.push(program(&inst, levels));
    }
    out
}

fn assert_well_formed(prog: &RealQuadraticProgram, r: &SolveResult) {
    if r.status == SolveStatus::Infeasible {
        assert!(r.point.is_none());
        return;
    }
    let p = r.point.as_ref().expect("feasible result carries a point");
    assert_eq!(p.a, prog.labels_of(&p.x));
    assert!(p.x.iter().all(|&i| i < prog.levels()));
    assert!(p.power() <= prog.power() + 1e-9, "power {} > {}", p.power(), prog.power());
    assert!((prog.objective(&p.a) - r.objective).abs() <= 1e-9 * (1.0 + r.objective.abs()));
    assert!(r.lower_bound <= r.objective + 1e-9 * (1.0 + r.objective.abs()));
    for w in r.incumbent_trace.windows(2) {
        assert!(w[1].objective < w[0].objective, "incumbents must strictly improve");
        assert!(w[1].node >= w[0].node);
    }
    if let Some(last) = r.incumbent_trace.last() {
        assert!((last.objective - r.objective).abs() <= 1e-9 * (1.0 + r.objective.abs()));
    }
}

#[test]
fn both_exact_solvers_match_enumeration() {
    let progs = small_programs(120, 31);
    let bnb_cfg = SolverConfig { strategy: SolverStrategy::RelaxationBnb, ..SolverConfig::default() };
    let mut feasible = 0;
    for (i, prog) in progs.iter().enumerate() {
        let exact = brute_force_solve(prog).unwrap();
        for r in [decomposed_search(prog, &SolverConfig::default()).unwrap(), branch_and_bound(prog, &bnb_cfg).unwrap()] {
            assert_eq!(r.status, exact.status, "instance {i}");
            assert_well_formed(prog, &r);
            if exact.status == SolveStatus::Optimal {
                assert!((r.objective - exact.objective).abs() <= 1e-9, "instance {i}: {} vs {}", r.objective, exact.objective);
                // The proven bound never exceeds the true optimum.
                assert!(r.lower_bound <= exact.objective + 1e-9);
            }
        }
        feasible += usize::from(exact.status == SolveStatus::Optimal);
    }
    assert!(feasible > 80, "only {feasible} feasible instances");
}

#[test]
fn desk_scale_solutions_are_feasible_lattice_points() {
    for (snr, stream) in [(-10.0, 0), (0.0, 1), (10.0, 2), (20.0, 3), (30.0, 4)] {
        let inst = instance(8, 2, snr, 5, stream);
        let spec = precoder_quantizer(&inst, 8).unwrap();
        let aware = quantization_aware_precoder(&inst, &spec, &SolverConfig::default()).unwrap();
        assert_eq!(aware.result.status, SolveStatus::Optimal, "snr {snr}");
        let p = aware.precoder.matrix();
        assert!(p.frobenius_norm_sq() <= inst.power() + 1e-9);
        for z in p.to_row_major() {
            assert!(spec.is_label(z.re) && spec.is_label(z.im));
        }
        let prog = build_real_program(&inst, aware.beta, &spec).unwrap();
        assert_well_formed(&prog, &aware.result);
    }
}

#[test]
fn aware_beats_every_feasible_unaware_lattice_point() {
    let mut compared = 0;
    for stream in 0..40 {
        let inst = instance(4, 2, 5.0 + stream as f64 / 2.0, 6, stream);
        let spec = precoder_quantizer(&inst, 4).unwrap();
        let beta = beta_wf(&inst).unwrap();
        let prog = build_real_program(&inst, beta, &spec).unwrap();
        let aware = quantization_aware_precoder(&inst, &spec, &SolverConfig::default()).unwrap();
        let wf = wf_precoder(&inst).unwrap();
        let lattice = quantize_complex_matrix(&spec, wf.matrix()).unwrap();
        if lattice.frobenius_norm_sq() <= inst.power() {
            compared += 1;
            assert!(aware.result.objective <= prog.objective(&embed_precoder(&lattice)) + 1e-9);
        }
        // The rescaled unaware precoder leaves the lattice, so only its power is checked.
        let unaware = quantization_unaware_precoder(&inst, &spec, wf.matrix()).unwrap();
        assert!((unaware.power() - inst.power()).abs() <= 1e-9 * inst.power());
    }
    assert!(compared > 0);
}

#[test]
fn budget_limited_solves_report_sound_bounds() {
    for prog in small_programs(20, 41) {
        let exact = brute_force_solve(&prog).unwrap();
        if exact.status != SolveStatus::Optimal {
            continue;
        }
        for strategy in [SolverStrategy::Decomposition, SolverStrategy::RelaxationBnb] {
            let cfg = SolverConfig { strategy, node_limit: Some(3), ..SolverConfig::default() };
            let r = solve(&prog, &cfg).unwrap();
            assert_well_formed(&prog, &r);
            assert!(r.lower_bound <= exact.objective + 1e-9);
            assert!(r.objective >= exact.objective - 1e-9);
        }
    }
}

#[test]
fn dump_round_trip_preserves_the_program() {
    let inst = instance(3, 2, 12.0, 9, 0);
    let spec = precoder_quantizer(&inst, 4).unwrap();
    let beta = beta_wf(&inst).unwrap();
    let prog = build_real_program(&inst, beta, &spec).unwrap();
    let result = decomposed_search(&prog, &SolverConfig::default()).unwrap();
    let dump = SolveDump::new(&inst, beta, &prog, &result);
    let back = SolveDump::from_json(&dump.to_json()).unwrap();
    assert_eq!(back, dump);

    let rebuilt = back.program().unwrap();
    assert_eq!(rebuilt.quadratic(), prog.quadratic());
    assert_eq!(rebuilt.linear(), prog.linear());
    assert_eq!(back.channel_matrix().unwrap(), *inst.channel());
    assert_eq!(back.solution.a_r, result.point.as_ref().unwrap().a);
    assert_eq!(rebuilt.objective(&back.solution.a_r), result.objective);
}

#[test]
fn small_system_is_solved_to_optimality_on_every_channel() {
    let median = |mut v: Vec<u64>| {
        v.sort_unstable();
        (v[v.len() / 2 - 1] + v[v.len() / 2]) / 2
    };
    let mut nodes = [Vec::new(), Vec::new()];
    for stream in 0..50 {
        let inst = instance(4, 2, 10.0, 2024, stream);
        let prog = program(&inst, 4);
        for (i, strategy) in [SolverStrategy::Decomposition, SolverStrategy::RelaxationBnb].into_iter().enumerate() {
            let r = solve(&prog, &SolverConfig { strategy, ..SolverConfig::default() }).unwrap();
            assert_eq!(r.status, SolveStatus::Optimal, "{strategy:?} on channel {stream}");
            nodes[i].push(r.nodes_explored);
        }
    }
    let [dec, bnb] = nodes;
    println!("median nodes over 50 channels: decomposition {}, relaxation branch-and-bound {}", median(dec), median(bnb));
}
