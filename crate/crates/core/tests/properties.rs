//! Property tests across the library's invariants.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use star_core::belief::{
    e_step, fit_posterior, folded_normal_mean, folded_normal_mean_dmu, Dataset, EmOptions, Posterior,
};
use star_core::planner::{accumulate_visits, plan_path, true_stealth_penalty};
use star_core::policy::{combine_scores, information_gain, reward, select_with_sample, Candidate, PolicyConfig};
use star_core::sensing::{
    observe_with_offsets, robot_sensing_action, simulate_observation, GroundTruth, Heading, NoiseModel, Observation,
    Pose, SensingAction, SensingRow,
};
use star_core::terrain::{risk_landscape, viewshed, FieldKind, FieldOfView, ScalarField, TargetViews, TerrainGrid};

fn dem(rows: usize, cols: usize, heights: &[f64]) -> TerrainGrid {
    TerrainGrid::new(rows, cols, 60.0, heights[..rows * cols].to_vec()).unwrap()
}

fn one_hot_action(cells: &[usize]) -> SensingAction {
    SensingAction {
        pose: Pose { cell: 0, heading: Heading::N },
        rows: cells
            .iter()
            .map(|&cell| SensingRow { cell, visibility: 1.0, distance_m: 60.0 })
            .collect(),
    }
}

/// Records over `m` cells: each is (distinct cells, y, variances).
fn records(m: usize) -> impl Strategy<Value = Vec<Observation>> {
    prop::collection::vec(
        (prop::sample::subsequence((0..m).collect::<Vec<_>>(), 1..=m.min(4)), any::<u64>()),
        0..6,
    )
    .prop_map(|recs| {
        recs.into_iter()
            .map(|(cells, seed)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                use rand::Rng;
                Observation {
                    y: cells.iter().map(|_| rng.random::<f64>()).collect(),
                    noise_variance: cells.iter().map(|_| rng.random_range(0.01..1.0)).collect(),
                    action: one_hot_action(&cells),
                }
            })
            .collect()
    })
}

fn dataset(records: &[Observation]) -> Dataset {
    let mut d = Dataset::new(0);
    for r in records {
        d.push(r.clone());
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // ----- terrain -------------------------------------------------------

    #[test]
    fn flat_viewshed_is_reciprocal(rows in 2usize..9, cols in 2usize..9, a in 0usize..64, b in 0usize..64, eye in 0.5f64..3.0) {
        let grid = TerrainGrid::flat(rows, cols, 60.0).unwrap().with_eye_height(eye).unwrap();
        let (a, b) = (a % grid.len(), b % grid.len());
        let fa = viewshed(&grid, a, FieldOfView::Omni, 0.0, 300.0).unwrap().fraction(b);
        let fb = viewshed(&grid, b, FieldOfView::Omni, 0.0, 300.0).unwrap().fraction(a);
        prop_assert_eq!(fa == 1.0, fb == 1.0);
    }

    #[test]
    fn raising_an_occluder_never_increases_visibility(
        heights in prop::collection::vec(0.0f64..10.0, 64),
        origin in 0usize..64,
        occluder in 0usize..64,
        raise in 0.1f64..30.0,
    ) {
        prop_assume!(origin != occluder);
        let grid = dem(8, 8, &heights);
        let mut higher = grid.clone();
        higher.set_height(occluder, grid.height(occluder) + raise);
        let before = viewshed(&grid, origin, FieldOfView::Omni, 0.0, 300.0).unwrap();
        let after = viewshed(&higher, origin, FieldOfView::Omni, 0.0, 300.0).unwrap();
        for cell in (0..64).filter(|&c| c != occluder) {
            prop_assert!(after.fraction(cell) <= before.fraction(cell), "cell {} rose", cell);
        }
    }

    #[test]
    fn risk_is_linear_in_weights(
        heights in prop::collection::vec(0.0f64..15.0, 36),
        w1 in prop::collection::vec(0.0f64..2.0, 36),
        w2 in prop::collection::vec(0.0f64..2.0, 36),
    ) {
        let grid = dem(6, 6, &heights);
        let views = TargetViews::build(&grid, 300.0).unwrap();
        let sum: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
        let r1 = views.risk_landscape(&w1).unwrap();
        let r2 = views.risk_landscape(&w2).unwrap();
        let r12 = views.risk_landscape(&sum).unwrap();
        for i in 0..36 {
            prop_assert!((r12.values[i] - r1.values[i] - r2.values[i]).abs() < 1e-9);
        }
        prop_assert_eq!(risk_landscape(&grid, &w1).unwrap(), r1);
    }

    // ----- sensing -------------------------------------------------------

    #[test]
    fn observations_are_clipped_and_rows_visible(
        heights in prop::collection::vec(0.0f64..20.0, 100),
        cell in 0usize..100,
        heading in 0usize..8,
        seed: u64,
        base in 0.01f64..2.0,
    ) {
        let grid = dem(10, 10, &heights);
        let truth = GroundTruth::new(&grid, vec![3, 44, 97], 300.0).unwrap();
        let action = robot_sensing_action(&grid, Pose { cell, heading: Heading::ALL[heading] }).unwrap();
        let noise = NoiseModel { base_sigma: base, ..Default::default() };
        let obs = simulate_observation(&truth, &action, &noise, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(obs.y.iter().all(|y| (0.0..=1.0).contains(y)));
        prop_assert!(action.rows.iter().all(|r| r.visibility > 0.0 && r.visibility <= 1.0));
        prop_assert!(obs.noise_variance.iter().all(|v| v.is_finite() && *v > 0.0));
        // Zero offsets reproduce the indicator exactly.
        let clean = observe_with_offsets(&truth, &action, &noise, &vec![0.0; action.len()]);
        for (row, y) in action.rows.iter().zip(&clean.y) {
            prop_assert_eq!(*y, truth.beta[row.cell]);
        }
    }

    // ----- belief --------------------------------------------------------

    #[test]
    fn precision_is_additive(a in records(6), b in records(6), gamma in prop::collection::vec(0.1f64..5.0, 6)) {
        let mut all = a.clone();
        all.extend(b.iter().cloned());
        let joint = e_step(&dataset(&all), &gamma).unwrap();
        let staged = e_step(&dataset(&a), &gamma).unwrap().update(&b).unwrap();
        for i in 0..6 {
            prop_assert!((joint.mu[i] - staged.mu[i]).abs() < 1e-8);
            prop_assert!((joint.var_diag[i] - staged.var_diag[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn e_step_matches_dense_regression(recs in records(5), gamma in prop::collection::vec(0.1f64..5.0, 5)) {
        let data = dataset(&recs);
        let q = data.rows();
        let mut x = DMatrix::<f64>::zeros(q, 5);
        let mut w = DVector::<f64>::zeros(q);
        let mut y = DVector::<f64>::zeros(q);
        let mut row = 0;
        for r in &recs {
            for (k, cell) in r.action.cells().enumerate() {
                x[(row, cell)] = 1.0;
                w[row] = 1.0 / r.noise_variance[k];
                y[row] = r.y[k];
                row += 1;
            }
        }
        let prior = DMatrix::from_diagonal(&DVector::from_iterator(5, gamma.iter().map(|g| 1.0 / g)));
        let wm = DMatrix::from_diagonal(&w);
        let v = (prior + x.transpose() * &wm * &x).try_inverse().unwrap();
        let mu = &v * x.transpose() * &wm * &y;
        let post = e_step(&data, &gamma).unwrap();
        for i in 0..5 {
            prop_assert!((post.mu[i] - mu[i]).abs() < 1e-8);
            prop_assert!((post.var_diag[i] - v[(i, i)]).abs() < 1e-8);
        }
    }

    #[test]
    fn em_keeps_gamma_positive(recs in records(6), init in prop::collection::vec(0.01f64..20.0, 6)) {
        let fit = fit_posterior(&dataset(&recs), &init, &EmOptions::default()).unwrap();
        prop_assert!(fit.posterior.gamma.iter().all(|g| g.is_finite() && *g > 0.0));
        prop_assert!(fit.posterior.var_diag.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn folded_mean_bounds_and_monotonicity(mu in -4.0f64..4.0, v in 0.001f64..9.0, dv in 0.0f64..3.0) {
        let f = folded_normal_mean(mu, v);
        prop_assert!(f >= mu.abs() - 1e-12);
        if mu.abs() / v.sqrt() < 5.0 {
            prop_assert!(f > mu.abs());
        }
        prop_assert_eq!(folded_normal_mean(mu, 0.0), mu.abs());
        prop_assert!(folded_normal_mean(mu.abs(), v + dv) >= folded_normal_mean(mu.abs(), v) - 1e-12);
    }

    #[test]
    fn folded_mean_gradient_matches_finite_differences(mu in -3.0f64..3.0, v in 0.05f64..5.0) {
        let h = 1e-5;
        let fd = (folded_normal_mean(mu + h, v) - folded_normal_mean(mu - h, v)) / (2.0 * h);
        prop_assert!((fd - folded_normal_mean_dmu(mu, v)).abs() < 1e-5);
    }

    // ----- policy --------------------------------------------------------

    #[test]
    fn selection_is_affine_invariant(
        raw in prop::collection::vec((-64i32..64, 0i32..64), 2..12),
        shift in -32i32..32,
        scale_pow in -3i32..4,
        tradeoff in 0u32..4,
    ) {
        // Dyadic values keep the normalization exact.
        let r: Vec<f64> = raw.iter().map(|&(a, _)| a as f64 / 8.0).collect();
        let p: Vec<f64> = raw.iter().map(|&(_, b)| b as f64 / 8.0).collect();
        let r2: Vec<f64> = r.iter().map(|x| x + shift as f64).collect();
        let p2: Vec<f64> = p.iter().map(|x| x * 2f64.powi(scale_pow)).collect();
        let g = tradeoff as f64 / 2.0;
        prop_assert_eq!(combine_scores(&r, &p, g), combine_scores(&r2, &p2, g));
    }

    #[test]
    fn zero_risk_star_selects_like_guts(
        mu in prop::collection::vec(-0.5f64..1.5, 8),
        var in prop::collection::vec(0.01f64..3.0, 8),
        sample in prop::collection::vec(-2.0f64..2.0, 8),
        seed: u64,
    ) {
        let post = Posterior { mu, var_diag: var.clone(), gamma: var, prior: Default::default() };
        let cands: Vec<Candidate> = (0..8)
            .map(|g| Candidate { action: one_hot_action(&[g, (g + 3) % 8]), goal: g })
            .collect();
        let refs: Vec<&Candidate> = cands.iter().collect();
        let zero = ScalarField::zeros(8, FieldKind::Risk);
        let noise = NoiseModel::default();
        let star = select_with_sample(&post, &sample, &refs, &zero, &PolicyConfig::default(), &noise, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let guts_cfg = PolicyConfig::new(star_core::PolicyKind::Guts);
        let guts = select_with_sample(&post, &sample, &refs, &zero, &guts_cfg, &noise, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(star, guts);
    }

    #[test]
    fn reward_is_non_positive(a in prop::collection::vec(-2.0f64..2.0, 1..10), lambda in 0.0f64..1.0) {
        let b: Vec<f64> = a.iter().map(|x| x * 0.5).collect();
        prop_assert!(reward(&a, &b, lambda, 0.1).unwrap() <= 0.0);
        let same = reward(&a, &a, lambda, 0.1).unwrap();
        prop_assert!(same == 0.0 || same == -lambda);
    }

    #[test]
    fn information_gain_matches_log_det(
        var in prop::collection::vec(0.0f64..3.0, 6),
        cells in prop::sample::subsequence((0..6).collect::<Vec<_>>(), 0..=6),
    ) {
        let post = Posterior { mu: vec![0.0; 6], var_diag: var.clone(), gamma: vec![1.0; 6], prior: Default::default() };
        let noise = NoiseModel::default();
        let action = one_hot_action(&cells);
        let gain = information_gain(&post, &action, &noise);
        prop_assert!(gain >= 0.0);
        // Dense oracle: 1/2 log det(I + W^1/2 X V X^T W^1/2).
        let q = cells.len();
        let s = noise.variance(60.0, 1.0);
        let mut k = DMatrix::<f64>::identity(q, q);
        for (i, &ci) in cells.iter().enumerate() {
            for (j, &cj) in cells.iter().enumerate() {
                if ci == cj {
                    k[(i, j)] += var[ci] / s;
                }
            }
        }
        let dense = 0.5 * k.determinant().ln();
        prop_assert!((gain - dense).abs() < 1e-9);
        // Chain rule: gain of both halves in sequence, with an interim update.
        if q >= 2 {
            let (first, second) = cells.split_at(q / 2);
            let g1 = information_gain(&post, &one_hot_action(first), &noise);
            let interim = post
                .update([&Observation { action: one_hot_action(first), y: vec![0.0; first.len()], noise_variance: vec![s; first.len()] }])
                .unwrap();
            let g2 = information_gain(&interim, &one_hot_action(second), &noise);
            prop_assert!((gain - g1 - g2).abs() < 1e-9);
        }
        if cells.iter().all(|&c| var[c] == 0.0) {
            prop_assert_eq!(gain, 0.0);
        }
    }

    // ----- planner -------------------------------------------------------

    #[test]
    fn more_risk_weight_never_adds_path_risk(
        risk in prop::collection::vec(0u8..=16, 64),
        start in 0usize..64,
        goal in 0usize..64,
        w1 in 0u8..8,
        dw in 0u8..8,
    ) {
        let grid = TerrainGrid::flat(8, 8, 60.0).unwrap();
        let field = ScalarField { values: risk.iter().map(|&r| r as f64 / 8.0).collect(), kind: FieldKind::Risk };
        let path_risk = |w: f64| {
            let p = plan_path(&grid, Some(&field), start, goal, w).unwrap();
            p.cells[1..].iter().map(|&c| field.values[c]).sum::<f64>()
        };
        let lo = w1 as f64 / 2.0;
        prop_assert!(path_risk(lo + dw as f64 / 2.0) <= path_risk(lo));
    }

    #[test]
    fn visits_add_and_penalty_is_linear(
        p1 in prop::collection::vec(0usize..25, 0..20),
        p2 in prop::collection::vec(0usize..25, 0..20),
        k in 1u32..5,
    ) {
        let grid = TerrainGrid::flat(5, 5, 60.0).unwrap();
        let truth = GroundTruth::new(&grid, vec![0, 12], 120.0).unwrap();
        let mut a = vec![0u32; 25];
        accumulate_visits(&mut a, &p1);
        let mut b = vec![0u32; 25];
        accumulate_visits(&mut b, &p2);
        let mut both = vec![0u32; 25];
        accumulate_visits(&mut both, &p1);
        accumulate_visits(&mut both, &p2);
        let concat: Vec<usize> = p1.iter().chain(&p2).copied().collect();
        let mut c = vec![0u32; 25];
        accumulate_visits(&mut c, &concat);
        prop_assert_eq!(&both, &c);
        let sum: Vec<u32> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        prop_assert_eq!(true_stealth_penalty(&sum, &truth), true_stealth_penalty(&a, &truth) + true_stealth_penalty(&b, &truth));
        let scaled: Vec<u32> = a.iter().map(|x| x * k).collect();
        prop_assert_eq!(true_stealth_penalty(&scaled, &truth), k as f64 * true_stealth_penalty(&a, &truth));
    }
}
