//! Randomized checks of the invariants each module promises.
use abtrack_core::abruptness::{
    abruptness_decision, fit_gmm, fit_gmm_traced, global_abrupt_degree, hellinger_distance, Gmm,
    COVARIANCE_FLOOR,
};
use abtrack_core::annf::{
    compute_annf, confidence_map, forward_backward_filter, incoherence_map, Correspondence,
    MatcherConfig, PatchField,
};
use abtrack_core::appearance::{
    bhattacharyya, build_histogram, logistic_likelihood, HsvHistogram, HISTOGRAM_LEN,
};
use abtrack_core::eval::{
    area_under_curve, precision_curve, precision_thresholds, success_curve, success_thresholds,
    voc_overlap, BoundingBox,
};
use abtrack_core::imaging::{dilate3, edge_map_from_luma, hsv_to_rgb, rgb_to_hsv, Frame, PixelRect, ScalarMap};
use abtrack_core::sampler::{
    acceptance_prob, gain, region_selection_probs, restrict_sample_space, run_chain, DensityOfStates,
    DosUpdate, PixelProposal, SamplerConfig, Smoother,
};
use abtrack_core::tracker::map_estimate;
use abtrack_core::{RegionGrid, TargetState};
use nalgebra::{Matrix3, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

fn binary_map(w: usize, h: usize, bits: &[bool]) -> ScalarMap {
    ScalarMap {
        width: w,
        height: h,
        values: bits.iter().map(|&b| f64::from(u8::from(b))).collect(),
    }
}

fn random_frame(w: usize, h: usize, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let px = (0..w * h)
        .map(|_| [rng.random::<f32>(), rng.random::<f32>(), rng.random::<f32>()])
        .collect();
    Frame::new(w, h, px).unwrap()
}

fn exhaustive_min(src: &Frame, dst: &Frame, p: usize, x: usize, y: usize) -> f64 {
    let half = p / 2;
    let mut best = f64::INFINITY;
    for ty in half..=dst.height() - p + half {
        for tx in half..=dst.width() - p + half {
            let mut d = 0.0f64;
            for j in 0..p {
                for i in 0..p {
                    let a = src.get(x - half + i, y - half + j);
                    let b = dst.get(tx - half + i, ty - half + j);
                    for c in 0..3 {
                        d += f64::from(a[c] - b[c]).powi(2);
                    }
                }
            }
            best = best.min(d);
        }
    }
    best
}

fn random_gmm(rng: &mut ChaCha8Rng) -> Gmm {
    let k = rng.random_range(1..=3);
    let parts: Vec<_> = (0..k)
        .map(|_| {
            let a = Matrix3::from_fn(|_, _| rng.random_range(-0.2..0.2));
            (
                rng.random_range(0.1..1.0),
                [rng.random(), rng.random(), rng.random()],
                a * a.transpose() + Matrix3::identity() * 0.002,
            )
        })
        .collect();
    Gmm::new(parts).unwrap()
}

fn normalized(raw: &[f64]) -> HsvHistogram {
    let mut counts = vec![0.0; HISTOGRAM_LEN];
    for (i, v) in raw.iter().enumerate() {
        counts[(i * 37) % HISTOGRAM_LEN] += v;
    }
    HsvHistogram::from_counts(&counts).unwrap()
}

// -- imaging ---------------------------------------------------------------

proptest! {
    #![proptest_config(cases(200))]

    #[test]
    fn dilation_is_extensive_and_monotone(
        w in 1usize..12, h in 1usize..12,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.2)).collect();
        let b: Vec<bool> = a.iter().map(|&x| x || rng.random_bool(0.2)).collect();
        let (ma, mb) = (binary_map(w, h, &a), binary_map(w, h, &b));
        let (da, db) = (dilate3(&ma), dilate3(&mb));
        for i in 0..w * h {
            prop_assert!(da.values[i] >= ma.values[i]);
            prop_assert!(db.values[i] >= da.values[i]);
            prop_assert!(da.values[i] == 0.0 || da.values[i] == 1.0);
        }
    }

    #[test]
    fn hsv_round_trip(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let hsv = rgb_to_hsv([r, g, b]);
        prop_assert!(hsv[0] >= 0.0 && hsv[0] < 360.0);
        prop_assert!((0.0..=1.0).contains(&hsv[1]) && (0.0..=1.0).contains(&hsv[2]));
        if hsv[1] > 0.0 {
            let back = hsv_to_rgb(hsv);
            for (x, y) in back.iter().zip([r, g, b]) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn edges_ignore_a_luminance_offset(
        w in 1usize..14, h in 1usize..14,
        seed in any::<u64>(), shift in 0u32..64,
    ) {
        // dyadic values keep the offset exact in floating point
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..w * h).map(|_| f64::from(rng.random_range(0u32..64)) / 64.0).collect();
        let base = ScalarMap { width: w, height: h, values: values.clone() };
        let c = f64::from(shift) / 64.0;
        let shifted = ScalarMap { width: w, height: h, values: values.iter().map(|v| v + c).collect() };
        prop_assert_eq!(edge_map_from_luma(&base, 0.25), edge_map_from_luma(&shifted, 0.25));
    }

    #[test]
    fn grid_cells_partition_the_frame(
        w in 1usize..60, h in 1usize..60, rows in 1usize..20, cols in 1usize..20,
    ) {
        let g = RegionGrid::new(w, h, rows, cols);
        let mut covered = vec![0u8; w * h];
        for c in 0..g.len() {
            let b = g.bounds(c);
            prop_assert!(b.area() > 0);
            for y in b.y0..b.y1 {
                for x in b.x0..b.x1 {
                    covered[y * w + x] += 1;
                    prop_assert_eq!(g.cell_of_pixel(x, y), c);
                }
            }
        }
        prop_assert!(covered.iter().all(|&n| n == 1));
    }
}

// -- annf ------------------------------------------------------------------

proptest! {
    #![proptest_config(cases(100))]

    #[test]
    fn field_never_beats_exhaustive_search(
        w in 5usize..12, h in 5usize..12, patch in 1usize..5, seed in any::<u64>(),
    ) {
        let src = random_frame(w, h, seed);
        let dst = random_frame(w, h, seed ^ 0x5eed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = compute_annf(&src, &dst, &MatcherConfig { patch, iterations: 3 }, &mut rng).unwrap();
        let half = patch / 2;
        for ((x, y), m) in f.iter() {
            let (tx, ty) = m.target(x, y);
            prop_assert!(tx >= half && ty >= half && tx + patch - half <= w && ty + patch - half <= h);
            prop_assert!(m.error >= 0.0);
            prop_assert!(m.error >= exhaustive_min(&src, &dst, patch, x, y) - 1e-4);
        }
    }

    #[test]
    fn shrinking_the_box_never_adds_survivors(
        seed in any::<u64>(),
        x0 in 0usize..10, y0 in 0usize..10, w in 1usize..10, h in 1usize..10,
        dx0 in 0usize..4, dy0 in 0usize..4, dx1 in 0usize..4, dy1 in 0usize..4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all = PixelRect { x0: 0, y0: 0, x1: 20, y1: 20 };
        let random_field = |rng: &mut ChaCha8Rng| {
            let matches = (0..400).map(|i| {
                let (x, y) = ((i % 20) as i32, (i / 20) as i32);
                let (tx, ty) = (rng.random_range(0..20), rng.random_range(0..20));
                Correspondence { dx: tx - x, dy: ty - y, error: 0.0 }
            }).collect();
            PatchField::from_matches(20, 20, 1, Some(all), matches).unwrap()
        };
        let fwd = random_field(&mut rng);
        let bwd = random_field(&mut rng);
        let outer = PixelRect { x0, y0, x1: (x0 + w).min(20), y1: (y0 + h).min(20) };
        let inner = PixelRect {
            x0: (outer.x0 + dx0).min(outer.x1),
            y0: (outer.y0 + dy0).min(outer.y1),
            x1: outer.x1.saturating_sub(dx1).max((outer.x0 + dx0).min(outer.x1)),
            y1: outer.y1.saturating_sub(dy1).max((outer.y0 + dy0).min(outer.y1)),
        };
        let big = forward_backward_filter(&fwd, &bwd, &outer);
        let small = forward_backward_filter(&fwd, &bwd, &inner);
        for (x, y) in small.iter() {
            prop_assert!(big.contains(x, y));
        }

        // mass conservation between incoherence and confidence
        let h_map = incoherence_map(&big, &fwd, &outer);
        let grid = RegionGrid::new(20, 20, 3, 4);
        let conf = confidence_map(&h_map, &grid);
        let mass: f64 = conf.lambda.iter().zip(&conf.pixel_counts).map(|(l, &n)| l * n as f64).sum();
        prop_assert!((mass - h_map.sum()).abs() < 1e-9);
        prop_assert!(conf.lambda.iter().all(|&l| l >= 0.0));
        for (x, y) in (0..400).map(|i| (i % 20, i / 20)) {
            if !big.contains(x, y) {
                prop_assert_eq!(h_map.get(x, y), 0.0);
            }
        }
    }
}

// -- abruptness -------------------------------------------------------------

proptest! {
    #![proptest_config(cases(200))]

    #[test]
    fn global_degree_is_scale_free(
        values in prop::collection::vec(0.0f64..5.0, 1..200), scale in 0.01f64..100.0,
    ) {
        let n = values.len();
        let r = ScalarMap { width: n, height: 1, values: values.clone() };
        let s = ScalarMap { width: n, height: 1, values: values.iter().map(|v| v * scale).collect() };
        let (g1, g2) = (global_abrupt_degree(&r), global_abrupt_degree(&s));
        prop_assert!((0.0..=1.0).contains(&g1));
        prop_assert!((g1 - g2).abs() < 1e-12);
    }

    #[test]
    fn decision_rule_shape(g in 0.0f64..=1.0, l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0, t in 0.01f64..0.99) {
        let r = abruptness_decision(g, l1, t);
        prop_assert_eq!(r.abrupt, g > t || r.a > 0.5);
        // monotone in l for fixed g at or below the threshold
        if g <= t {
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            prop_assert!(abruptness_decision(g, lo, t).abrupt <= abruptness_decision(g, hi, t).abrupt);
        }
        // monotone in g whenever the local term does not pull a down
        if l1 >= 0.45 {
            let g2 = (g + 0.1).min(1.0);
            prop_assert!(r.abrupt <= abruptness_decision(g2, l1, t).abrupt);
        }
    }
}

proptest! {
    #![proptest_config(cases(100))]

    #[test]
    fn hellinger_self_distance_and_symmetry(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_gmm(&mut rng);
        let q = random_gmm(&mut rng);
        let d_pp = hellinger_distance(&p, &p, 10_000, &mut rng);
        prop_assert!(d_pp <= 0.02, "{}", d_pp);
        let d_pq = hellinger_distance(&p, &q, 10_000, &mut rng);
        let d_qp = hellinger_distance(&q, &p, 10_000, &mut rng);
        prop_assert!((0.0..=1.0).contains(&d_pq));
        prop_assert!((d_pq - d_qp).abs() <= 0.03, "{} vs {}", d_pq, d_qp);
    }

    #[test]
    fn em_never_decreases_likelihood(seed in any::<u64>(), n in 3usize..300, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<[f64; 3]> = (0..3).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let spread = rng.random_range(0.005..0.2);
        let samples: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let c = centers[i % 3];
                [c[0] + spread * rng.random::<f64>(), c[1] + spread * rng.random::<f64>(), c[2] + spread * rng.random::<f64>()]
            })
            .collect();
        let (gmm, trace) = fit_gmm_traced(&samples, k, &mut rng).unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{:?}", trace);
        }
        let total: f64 = gmm.components().iter().map(|c| c.weight).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        for c in gmm.components() {
            prop_assert!(c.weight > 0.0);
            let eig = SymmetricEigen::new(c.covariance).eigenvalues;
            prop_assert!(eig.iter().all(|&e| e >= COVARIANCE_FLOOR * (1.0 - 1e-9)));
        }
        // same seed, same fit
        let mut r1 = ChaCha8Rng::seed_from_u64(seed);
        let mut r2 = ChaCha8Rng::seed_from_u64(seed);
        let a = fit_gmm(&samples, k, &mut r1).unwrap();
        let b = fit_gmm(&samples, k, &mut r2).unwrap();
        prop_assert_eq!(a.components()[0].mean, b.components()[0].mean);
    }
}

// -- appearance -------------------------------------------------------------

proptest! {
    #![proptest_config(cases(200))]

    #[test]
    fn likelihood_is_a_monotone_logistic(d1 in 0.0f64..=1.0, d2 in 0.0f64..=1.0, e in 1e-6f64..0.5) {
        let p = logistic_likelihood(d1, d2);
        prop_assert!(p > 0.0 && p < 1.0);
        prop_assert!(logistic_likelihood(d1 + e, d2) < p);
        prop_assert!(logistic_likelihood(d1, d2 + e) > p);
    }

    #[test]
    fn bhattacharyya_is_a_metric(
        a in prop::collection::vec(0.0f64..1.0, 1..40),
        b in prop::collection::vec(0.0f64..1.0, 1..40),
        c in prop::collection::vec(0.0f64..1.0, 1..40),
    ) {
        prop_assume!(a.iter().sum::<f64>() > 0.0 && b.iter().sum::<f64>() > 0.0 && c.iter().sum::<f64>() > 0.0);
        let (ha, hb, hc) = (normalized(&a), normalized(&b), normalized(&c));
        let dab = bhattacharyya(&ha, &hb).unwrap();
        prop_assert!((dab - bhattacharyya(&hb, &ha).unwrap()).abs() < 1e-12);
        prop_assert!(bhattacharyya(&ha, &ha).unwrap() < 1e-6);
        let dbc = bhattacharyya(&hb, &hc).unwrap();
        let dac = bhattacharyya(&ha, &hc).unwrap();
        prop_assert!(dac <= dab + dbc + 1e-9);
        prop_assert!((0.0..=1.0).contains(&dab));
    }

    #[test]
    fn histogram_moves_with_its_content(
        seed in any::<u64>(), bw in 1usize..8, bh in 1usize..8,
        bx in 0usize..6, by in 0usize..6, sx in 0usize..8, sy in 0usize..8,
    ) {
        let (w, h) = (24, 20);
        let base = random_frame(w, h, seed);
        let shifted_px = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if x >= sx && y >= sy { base.get(x - sx, y - sy) } else { [0.0; 3] }
            })
            .collect();
        let shifted = Frame::new(w, h, shifted_px).unwrap();
        let rect = PixelRect { x0: bx, y0: by, x1: bx + bw, y1: by + bh };
        let moved = PixelRect { x0: bx + sx, y0: by + sy, x1: bx + bw + sx, y1: by + bh + sy };
        prop_assert_eq!(build_histogram(&base, rect).unwrap(), build_histogram(&shifted, moved).unwrap());
    }
}

// -- sampler ----------------------------------------------------------------

proptest! {
    #![proptest_config(cases(200))]

    #[test]
    fn acceptance_ignores_posterior_scale(
        pc in 1e-6f64..1.0, pk in 1e-6f64..1.0, lc in 1e-6f64..3.0, lk in 1e-6f64..3.0,
        wc in -50.0f64..50.0, wk in -50.0f64..50.0, qf in 1e-6f64..1.0, qb in 1e-6f64..1.0,
        scale in 1e-3f64..1e3,
    ) {
        let a = acceptance_prob(pc, pk, lc, lk, wc, wk, qb, qf);
        let b = acceptance_prob(pc * scale, pk * scale, lc, lk, wc, wk, qb, qf);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn smoothing_is_linear_and_keeps_uniform(
        rows in 1usize..8, cols in 1usize..8, cutoff in 1.0f64..200.0,
        r1 in prop::collection::vec(0.0f64..5.0, 64), r2 in prop::collection::vec(0.0f64..5.0, 64),
        a in -3.0f64..3.0, b in -3.0f64..3.0,
    ) {
        let grid = RegionGrid::new(120, 90, rows, cols);
        let m = grid.len();
        let s = Smoother::new(&grid, cutoff);
        let (r1, r2) = (&r1[..m], &r2[..m]);
        let combo: Vec<f64> = r1.iter().zip(r2).map(|(x, y)| a * x + b * y).collect();
        let (f1, f2, fc) = (s.smooth(r1, 5.0), s.smooth(r2, 5.0), s.smooth(&combo, 5.0));
        for i in 0..m {
            prop_assert!((fc[i] - (a * f1[i] + b * f2[i])).abs() < 1e-9);
        }
        let uniform = s.smooth(&vec![5.0 / m as f64; m], 5.0);
        prop_assert!(uniform.iter().all(|&f| (f - 1.0 / m as f64).abs() < 1e-12));
    }

    #[test]
    fn over_visited_cells_become_harder_to_enter(
        m in 2usize..30, hot in 0usize..30, gamma_k in 1usize..500, k0 in 1.0f64..300.0,
        lp in -5.0f64..0.0,
    ) {
        let hot = hot % m;
        let cold = (hot + 1) % m;
        let pi = vec![1.0 / m as f64; m];
        let mut f = vec![0.0; m];
        f[hot] = 1.0;
        let mut dos = DensityOfStates::uniform(m);
        let before = acceptance_prob(lp.exp(), lp.exp(), 0.5, 0.5, dos.log_omega[hot], dos.log_omega[cold], 0.1, 0.1);
        let gamma = gain(gamma_k, k0);
        dos.update(&f, &pi, gamma, DosUpdate::Standard, &(0..m).collect::<Vec<_>>());
        prop_assert!(dos.log_omega[hot] > dos.log_omega[cold]);
        let after = acceptance_prob(lp.exp(), lp.exp(), 0.5, 0.5, dos.log_omega[hot], dos.log_omega[cold], 0.1, 0.1);
        prop_assert!(after < before);
    }

    #[test]
    fn gain_is_one_then_decreasing(k in 1usize..10_000, k0 in 1.0f64..1000.0) {
        prop_assert!(gain(k + 1, k0) <= gain(k, k0));
        if (k as f64) <= k0 {
            prop_assert_eq!(gain(k, k0), 1.0);
        }
    }
}

proptest! {
    #![proptest_config(cases(100))]

    #[test]
    fn smooth_frames_keep_the_chain_in_the_neighborhood(
        seed in any::<u64>(), px in 0.0f64..319.0, py in 0.0f64..239.0,
    ) {
        let grid = RegionGrid::new(320, 240, 15, 15);
        let prev = TargetState::new(px, py, 1.0);
        let space = restrict_sample_space(false, &prev, &grid);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda: Vec<f64> = (0..grid.len()).map(|_| if rng.random_bool(0.3) { rng.random() } else { 0.0 }).collect();
        let rho = region_selection_probs(&lambda, 0.8);
        let cfg = SamplerConfig { iterations: 10, ..SamplerConfig::default() };
        let kernel = PixelProposal::new(&grid, &space, &rho, cfg.beta, cfg.sigma, true);
        let smoother = Smoother::new(&grid, cfg.cutoff);
        let out = run_chain(
            &kernel,
            |s: &TargetState| Ok(-((s.x - 160.0).powi(2) + (s.y - 120.0).powi(2)) / 5000.0),
            prev,
            &lambda,
            DensityOfStates::from_confidence(&lambda, cfg.tau),
            &space,
            &smoother,
            &cfg,
            &mut rng,
        ).unwrap();
        prop_assert_eq!(out.samples.len(), 50);
        let (map, _) = map_estimate(&out.samples).unwrap();
        prop_assert!(space.contains(grid.cell_of(map.x, map.y).unwrap()));
        for (s, _) in &out.samples {
            prop_assert!(space.contains(grid.cell_of(s.x, s.y).unwrap()));
        }
    }
}

// -- tracker / eval ---------------------------------------------------------

proptest! {
    #![proptest_config(cases(200))]

    #[test]
    fn map_ignores_posterior_scale(
        posts in prop::collection::vec(1e-6f64..1.0, 1..50), scale in 1e-3f64..1e3,
    ) {
        let a: Vec<(usize, f64)> = posts.iter().copied().enumerate().collect();
        let b: Vec<(usize, f64)> = posts.iter().map(|p| p * scale).enumerate().collect();
        prop_assert_eq!(map_estimate(&a).unwrap().0, map_estimate(&b).unwrap().0);
    }

    #[test]
    fn overlap_is_symmetric_and_one_only_for_equal_boxes(
        a in (0.0f64..50.0, 0.0f64..50.0, 0.5f64..30.0, 0.5f64..30.0),
        b in (0.0f64..50.0, 0.0f64..50.0, 0.5f64..30.0, 0.5f64..30.0),
    ) {
        let a = BoundingBox::new(a.0, a.1, a.2, a.3);
        let b = BoundingBox::new(b.0, b.1, b.2, b.3);
        let v = voc_overlap(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, voc_overlap(&b, &a));
        prop_assert_eq!(voc_overlap(&a, &a), 1.0);
        if a != b {
            prop_assert!(v < 1.0);
        }
    }

    #[test]
    fn curves_are_monotone_and_auc_is_their_mean(
        cle in prop::collection::vec(0.0f64..80.0, 1..60),
        vor in prop::collection::vec(0.0f64..=1.0, 1..60),
    ) {
        let p = precision_curve(&cle, &precision_thresholds());
        prop_assert!(p.windows(2).all(|w| w[1].1 >= w[0].1));
        let s = success_curve(&vor, &success_thresholds());
        prop_assert!(s.windows(2).all(|w| w[1].1 <= w[0].1));
        let auc = area_under_curve(&s);
        prop_assert!((0.0..=1.0).contains(&auc));
        let mean = s.iter().map(|x| x.1).sum::<f64>() / s.len() as f64;
        // trapezoid vs sample mean differ by at most one grid step
        prop_assert!((auc - mean).abs() <= 1.0 / 100.0 + 1e-12);
    }
}

#[test]
fn empty_frame_map_is_an_error() {
    let none: Vec<(u8, f64)> = Vec::new();
    assert!(map_estimate(&none).is_err());
}
