//! Closed-form secrecy evaluation paths against each other and against
//! brute-force oracles.

use fjsim::channel::{stream_rng, Antennas, ChannelDraw, CsiMode, CsiState};
use fjsim::conventional::{
    design_fj, gsc, secrecy_rate_direct, secrecy_rate_imcsi, secrecy_rate_perfect, waterfill, waterfill_objective, SvdPrecoder,
};
use fjsim::linalg::ComplexMatrix;
use rand::Rng;

/// Best objective on the simplex grid `p_i = k_i·P/1000`.
fn grid_oracle(gains: &[f64; 3], p: f64) -> f64 {
    let steps = 1000;
    let dp = p / steps as f64;
    let mut best = f64::NEG_INFINITY;
    for a in 0..=steps {
        for b in 0..=steps - a {
            let c = steps - a - b;
            let v = waterfill_objective(gains, &[a as f64 * dp, b as f64 * dp, c as f64 * dp]);
            best = best.max(v);
        }
    }
    best
}

#[test]
fn waterfill_beats_grid_oracle() {
    let mut rng = stream_rng(1, 0);
    for _ in 0..100 {
        let gains = [rng.random_range(0.05..10.0), rng.random_range(0.05..10.0), rng.random_range(0.05..10.0)];
        let p = rng.random_range(0.1..20.0);
        let a = waterfill(&gains, p).unwrap();
        assert!((a.per_stream.iter().sum::<f64>() - p).abs() <= 1e-9 * p);
        let ours = waterfill_objective(&gains, &a.per_stream);
        let grid = grid_oracle(&gains, p);
        assert!(ours >= grid - 1e-12, "waterfill {ours} below grid {grid}");
        assert!(ours - grid <= 2e-3);
    }
}

#[test]
fn direct_and_diagonal_forms_agree() {
    for i in 0..500u64 {
        let nt = 2 + (i % 5) as usize;
        let nr = 1 + (i % 3) as usize % nt.max(1);
        let ne = 1 + (i % 4) as usize;
        let draw = ChannelDraw::indexed(Antennas::new(nt, nr.min(nt), ne).unwrap(), 1.0, 1.0, 9, i);
        let p = 10f64.powf((i % 31) as f64 / 10.0);
        let pre = SvdPrecoder::new(&draw.h).unwrap();
        let alloc = pre.allocate(0.6 * p, 1.0).unwrap();
        let n_fj = draw.h.rows().saturating_sub(draw.h.cols());
        let sv2 = if n_fj == 0 { 0.0 } else { 0.4 * p / n_fj as f64 };
        let design = design_fj(&draw.h, sv2).unwrap();
        let a = secrecy_rate_direct(&draw, &pre.signal_covariance(&alloc), &design).unwrap();
        let b = secrecy_rate_perfect(&draw, &alloc, &design).unwrap();
        assert!((a.r_ab - b.r_ab).abs() <= 1e-8, "instance {i}: {} vs {}", a.r_ab, b.r_ab);
        assert!((a.r_s - b.r_s).abs() <= 1e-8);
    }
}

#[test]
fn gsc_approaches_legitimate_information_with_strong_jamming() {
    let draw = ChannelDraw::indexed(Antennas::new(6, 2, 3).unwrap(), 1.0, 1.0, 4, 0);
    let q = ComplexMatrix::identity(6);
    let mut prev = 0.0;
    for sv2 in [1.0, 1e2, 1e4, 1e6] {
        let g = gsc(2.0, &draw.g, &design_fj(&draw.h, sv2).unwrap(), &q).unwrap();
        assert!(g.value >= prev);
        prev = g.value;
    }
    assert!((prev - 2.0).abs() < 1e-3, "{prev}");
    assert_eq!(gsc(0.0, &draw.g, &design_fj(&draw.h, 1.0).unwrap(), &q).unwrap().value, 0.0);
}

#[test]
fn imperfect_csi_reduces_to_perfect_and_costs_rate() {
    let ant = Antennas::new(4, 2, 2).unwrap();
    let p = 30.0;
    let (mut perfect, mut noisy) = (0.0, 0.0);
    for i in 0..400u64 {
        let draw = ChannelDraw::indexed(ant, 1.0, 1.0, 12, i);
        let pre = SvdPrecoder::new(&draw.h).unwrap();
        let alloc = pre.allocate(0.6 * p, 1.0).unwrap();
        let design = design_fj(&draw.h, 0.2 * p).unwrap();
        let exact = secrecy_rate_perfect(&draw, &alloc, &design).unwrap();
        let same = secrecy_rate_imcsi(&draw, &CsiState::perfect(&draw), &alloc, &design).unwrap();
        assert!((exact.r_s - same.r_s).abs() <= 1e-9);
        perfect += exact.r_s;

        let csi = CsiState::observe(&draw, CsiMode::Statistical { rho_e2: 0.1 }, &mut stream_rng(12, (1 << 32) + i)).unwrap();
        let h_hat = csi.estimate().unwrap();
        let pre_hat = SvdPrecoder::new(h_hat).unwrap();
        let alloc_hat = pre_hat.allocate(0.6 * p, 1.0).unwrap();
        let design_hat = design_fj(h_hat, 0.2 * p).unwrap();
        noisy += secrecy_rate_imcsi(&draw, &csi, &alloc_hat, &design_hat).unwrap().r_s;
    }
    assert!(noisy < perfect, "{noisy} vs {perfect}");
}
