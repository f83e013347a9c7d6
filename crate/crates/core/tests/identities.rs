//! Algebraic equivalences between the estimator forms, checked on random instances
//! against independent oracles (explicit LU inverses, stacked batch estimates).

use kalman_core::batch::{
    error_covariance_of_linear_estimator, gauss_markov, linear_function_estimate, min_variance_estimate,
    min_variance_prior_gain, min_variance_prior_info, SecondMoments,
};
use kalman_core::bayes::{bayes_filter_run, correct, information_correct, predict};
use kalman_core::trace::step_deviations;
use kalman_core::linalg::{
    max_abs, psd_check, relative_deviation, spd_check, woodbury_posterior_cov, Definiteness, Matrix, SpdMatrix, Vector,
    SYM_TOL,
};
use kalman_core::projection::{projection_filter_run, ProjectionFilterState, projection_step};
use kalman_core::random;
use kalman_core::sequential::{update, update_with, CovarianceForm, MeasurementBlock, PriorEstimate};
use kalman_core::simulator::{batch_oracle_estimate, propagate_moments, sample_trajectory, stack_measurements, StreamSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn inverse(m: &Matrix) -> Matrix {
    m.clone().try_inverse().expect("invertible test matrix")
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    relative_deviation(a.as_slice(), b.as_slice())
}

#[test]
fn woodbury_matches_direct_information_inverse() {
    let mut r = rng(1);
    for _ in 0..300 {
        let n = r.random_range(1..=8);
        let m = r.random_range(1..=8);
        let p = random::spd_matrix(&mut r, n);
        let rr = random::spd_matrix(&mut r, m);
        let h = random::uniform_matrix(&mut r, m, n);
        let lemma = woodbury_posterior_cov(&p, &h, &rr).unwrap();
        let direct = inverse(&(inverse(p.matrix()) + h.transpose() * inverse(rr.matrix()) * &h));
        assert!(rel(lemma.matrix(), &direct) <= 1e-10, "woodbury deviation {}", rel(lemma.matrix(), &direct));
    }
}

#[test]
fn determinant_identity_with_posterior_information() {
    let mut r = rng(2);
    for _ in 0..300 {
        let n = r.random_range(1..=6);
        let m = r.random_range(1..=6);
        let p = random::spd_matrix(&mut r, n);
        let rr = random::spd_matrix(&mut r, m);
        let h = random::uniform_matrix(&mut r, m, n);
        let s = spd_check(&(rr.matrix() + &h * p.matrix() * h.transpose()), SYM_TOL).unwrap();
        let info = inverse(p.matrix()) + h.transpose() * inverse(rr.matrix()) * &h;
        let lhs = s.logdet();
        let rhs = rr.logdet() + p.logdet() + info.determinant().ln();
        assert!((lhs - rhs).abs() <= 1e-9, "{lhs} vs {rhs}");
    }
}

#[test]
fn gain_and_information_forms_agree() {
    let mut r = rng(3);
    for _ in 0..300 {
        let p = random::batch_problem(&mut r, 8, 8);
        let g = min_variance_prior_gain(&p).unwrap();
        let i = min_variance_prior_info(&p).unwrap();
        assert!(relative_deviation(g.beta_hat.as_slice(), i.beta_hat.as_slice()) <= 1e-9);
        assert!(rel(g.error_cov.matrix(), i.error_cov.matrix()) <= 1e-9);
        assert!(rel(&g.gain, &i.gain) <= 1e-9);
    }
}

#[test]
fn gauss_markov_gain_is_unbiased() {
    let mut r = rng(4);
    for _ in 0..200 {
        let p = random::gauss_markov_problem(&mut r, 6, 10);
        let e = gauss_markov(&p).unwrap();
        let n = p.state_dim();
        assert!(max_abs((&e.gain * &p.w - Matrix::identity(n, n)).as_slice()) <= 1e-10);
    }
}

#[test]
fn weak_prior_approaches_gauss_markov() {
    let mut r = rng(5);
    for _ in 0..100 {
        let mut p = random::gauss_markov_problem(&mut r, 5, 9);
        let gm = gauss_markov(&p).unwrap();
        p.prior = Some(spd_check(&(Matrix::identity(p.state_dim(), p.state_dim()) * 1e8), SYM_TOL).unwrap());
        let mv = min_variance_prior_info(&p).unwrap();
        assert!(relative_deviation(mv.beta_hat.as_slice(), gm.beta_hat.as_slice()) <= 1e-5);
        assert!(rel(mv.error_cov.matrix(), gm.error_cov.matrix()) <= 1e-5);
    }
}

#[test]
fn perturbed_gains_are_never_better() {
    let mut r = rng(6);
    for _ in 0..50 {
        let p = random::batch_problem(&mut r, 6, 6);
        let opt = min_variance_prior_gain(&p).unwrap();
        let opt_cov = error_covariance_of_linear_estimator(&opt.gain, &p).unwrap();
        let weights: Vec<Matrix> = (0..5).map(|_| random::psd_weight(&mut r, p.state_dim())).collect();
        for _ in 0..50 {
            let scale = 10f64.powf(r.random_range(-6.0..0.0));
            let dk = random::uniform_matrix(&mut r, p.state_dim(), p.measurement_dim()) * scale;
            let cov = error_covariance_of_linear_estimator(&(&opt.gain + dk), &p).unwrap();
            assert!(cov.trace() >= opt_cov.trace() - 1e-12);
            for w in &weights {
                assert!((w * &cov).trace() >= (w * &opt_cov).trace() - 1e-12);
            }
        }
    }
}

#[test]
fn transform_commutes_with_estimation() {
    let mut r = rng(7);
    for _ in 0..200 {
        let p = random::batch_problem(&mut r, 6, 6);
        let k = r.random_range(1..=4);
        let t = random::uniform_matrix(&mut r, k, p.state_dim());
        let est = min_variance_prior_gain(&p).unwrap();
        let transformed = linear_function_estimate(&t, &est).unwrap();

        let prior = p.prior.as_ref().unwrap().matrix();
        let moments = SecondMoments {
            cov_beta_y: &t * prior * p.w.transpose(),
            cov_yy: p.second_moments().unwrap().cov_yy,
        };
        let direct = min_variance_estimate(&moments, &(&t * prior * t.transpose()), &p.y).unwrap();
        assert!(relative_deviation(transformed.beta_hat.as_slice(), direct.beta_hat.as_slice()) <= 1e-10);
        assert!(max_abs((transformed.error_cov.matrix() - direct.error_cov.matrix()).as_slice()) <= 1e-10);
    }
}

#[test]
fn single_block_update_equals_batch_estimate() {
    let mut r = rng(8);
    for _ in 0..200 {
        let p = random::batch_problem(&mut r, 6, 6);
        let prior = PriorEstimate {
            mean: Vector::zeros(p.state_dim()),
            cov: p.prior.clone().unwrap(),
        };
        let blk = MeasurementBlock {
            w: p.w.clone(),
            q: p.q.clone(),
            y: p.y.clone(),
        };
        let seq = update(&prior, &blk).unwrap();
        let batch = min_variance_prior_gain(&p).unwrap();
        assert!(max_abs((&seq.mean - &batch.beta_hat).as_slice()) <= 1e-10);
        assert!(max_abs((seq.cov.matrix() - batch.error_cov.matrix()).as_slice()) <= 1e-10);
    }
}

#[test]
fn block_order_does_not_change_covariance() {
    let mut r = rng(9);
    for _ in 0..200 {
        let n = r.random_range(1..=6);
        let prior = PriorEstimate {
            mean: random::uniform_vector(&mut r, n),
            cov: random::spd_matrix(&mut r, n),
        };
        let block = |r: &mut ChaCha8Rng| {
            let m = r.random_range(1..=4);
            MeasurementBlock {
                w: random::uniform_matrix(r, m, n),
                q: random::spd_matrix(r, m),
                y: random::uniform_vector(r, m),
            }
        };
        let (a, b) = (block(&mut r), block(&mut r));
        let ab = update(&update(&prior, &a).unwrap(), &b).unwrap();
        let ba = update(&update(&prior, &b).unwrap(), &a).unwrap();
        assert!(rel(ab.cov.matrix(), ba.cov.matrix()) <= 1e-9);
        assert!(relative_deviation(ab.mean.as_slice(), ba.mean.as_slice()) <= 1e-9);

        // the update never adds uncertainty
        let shrink = prior.cov.matrix() - update(&prior, &a).unwrap().cov.matrix();
        assert!(psd_check(&shrink, SYM_TOL).is_ok());
    }
}

#[test]
fn joseph_update_matches_standard_update() {
    let mut r = rng(10);
    for _ in 0..100 {
        let p = random::batch_problem(&mut r, 5, 5);
        let prior = PriorEstimate {
            mean: random::uniform_vector(&mut r, p.state_dim()),
            cov: p.prior.clone().unwrap(),
        };
        let blk = MeasurementBlock { w: p.w.clone(), q: p.q.clone(), y: p.y.clone() };
        let a = update_with(&prior, &blk, CovarianceForm::Standard).unwrap();
        let b = update_with(&prior, &blk, CovarianceForm::Joseph).unwrap();
        assert!(rel(a.cov.matrix(), b.cov.matrix()) <= 1e-10);
    }
}

#[test]
fn bayes_gain_and_information_corrections_agree() {
    let mut r = rng(11);
    for _ in 0..300 {
        let n = r.random_range(1..=6);
        let m = r.random_range(1..=6);
        let b = random::gaussian_belief(&mut r, n);
        let h = random::uniform_matrix(&mut r, m, n);
        let rr = random::spd_matrix(&mut r, m);
        let z = random::uniform_vector(&mut r, m);
        let g = correct(&b, &h, &rr, &z).unwrap();
        let i = information_correct(&b, &h, &rr, &z).unwrap();
        assert!(relative_deviation(g.posterior.mean.as_slice(), i.posterior.mean.as_slice()) <= 1e-10);
        assert!(rel(g.posterior.cov.matrix(), i.posterior.cov.matrix()) <= 1e-10);

        // K = PHᵀS⁻¹ = (P⁻¹ + HᵀR⁻¹H)⁻¹HᵀR⁻¹
        let rinv = inverse(rr.matrix());
        let dual = inverse(&(inverse(b.cov.matrix()) + h.transpose() * &rinv * &h)) * h.transpose() * rinv;
        assert!(rel(&g.gain, &dual) <= 1e-10);
    }
}

#[test]
fn projection_recursion_equals_correct_then_predict() {
    let mut r = rng(12);
    let mut worst = 0.0f64;
    for _ in 0..40 {
        let n = r.random_range(1..=6);
        let m = r.random_range(1..=6);
        let model = random::state_space_model(&mut r, n, m).unwrap();
        let p0 = random::spd_matrix(&mut r, n);
        let x0 = random::uniform_vector(&mut r, n);
        let traj = sample_trajectory(&model, &x0, &p0, 49, r.random::<u64>()).unwrap();

        let mut state = ProjectionFilterState::initial(x0.clone(), p0.clone()).unwrap();
        let mut belief = kalman_core::bayes::GaussianBelief::new(x0.clone(), p0.clone()).unwrap();
        for (k, z) in traj.measurements.iter().enumerate() {
            let sm = model.step(k).unwrap();
            state = projection_step(&state, sm, z).unwrap();
            let c = correct(&belief, sm.h, sm.r, z).unwrap();
            belief = predict(&c.posterior, sm.phi, sm.q).unwrap();
            worst = worst
                .max(relative_deviation(state.x_pred.as_slice(), belief.mean.as_slice()))
                .max(rel(state.p_pred.matrix(), belief.cov.matrix()));
        }
    }
    assert!(worst <= 1e-12, "worst deviation {worst}");
}

#[test]
fn covariance_recursion_ignores_measurements() {
    let mut r = rng(13);
    let model = random::state_space_model(&mut r, 3, 2).unwrap();
    let p0 = random::spd_matrix(&mut r, 3);
    let x0 = Vector::zeros(3);
    let a = sample_trajectory(&model, &x0, &p0, 30, 1).unwrap();
    let b = sample_trajectory(&model, &x0, &p0, 30, 2).unwrap();
    let ta = projection_filter_run(&model, &a.measurements, &x0, &p0).unwrap();
    let tb = projection_filter_run(&model, &b.measurements, &x0, &p0).unwrap();
    for (sa, sb) in ta.steps.iter().zip(&tb.steps) {
        assert_eq!(sa.prior.cov.matrix(), sb.prior.cov.matrix());
        assert_eq!(sa.posterior.cov.matrix(), sb.posterior.cov.matrix());
        // P_{k+1} ≽ Q
        let q = model.step(sa.k).unwrap().q.matrix();
        if sa.k > 0 {
            assert!(psd_check(&(sa.prior.cov.matrix() - q), SYM_TOL).is_ok());
        }
    }
}

#[test]
fn recursive_filter_matches_stacked_estimate() {
    let mut r = rng(14);
    for _ in 0..40 {
        let n = r.random_range(1..=4);
        let m = r.random_range(1..=3);
        let horizon = r.random_range(0..=10);
        let model = random::state_space_model(&mut r, n, m).unwrap();
        let p0 = random::spd_matrix(&mut r, n);
        let x0 = random::uniform_vector(&mut r, n);
        let traj = sample_trajectory(&model, &x0, &p0, horizon, StreamSeed::new(r.random(), 0)).unwrap();
        let trace = projection_filter_run(&model, &traj.measurements, &x0, &p0).unwrap();
        let moments = propagate_moments(&model, &x0, &p0, horizon).unwrap();
        let (xk, cov) = batch_oracle_estimate(&moments, &stack_measurements(&traj.measurements)).unwrap();
        let post = trace.last_posterior().unwrap();
        assert!(relative_deviation(post.mean.as_slice(), xk.as_slice()) <= 1e-8);
        assert!(rel(post.cov.matrix(), &cov) <= 1e-8);

        // predicted state from z_0..z_{K−1}
        if horizon > 0 {
            let prev = propagate_moments(&model, &x0, &p0, horizon - 1).unwrap();
            let last = trace.steps.last().unwrap();
            let ahead = propagate_one_more(&model, &prev, horizon - 1);
            let (pred, pred_cov) =
                batch_oracle_estimate(&ahead, &stack_measurements(&traj.measurements[..horizon])).unwrap();
            assert!(relative_deviation(last.prior.mean.as_slice(), pred.as_slice()) <= 1e-8);
            assert!(rel(last.prior.cov.matrix(), &pred_cov) <= 1e-8);
        }
    }
}

/// Moments of `(x_{K+1}, z_0..z_K)` from those of `(x_K, z_0..z_K)`: `x_{K+1} = Φ_K x_K + u_K`.
fn propagate_one_more(
    model: &kalman_core::StateSpaceModel,
    m: &kalman_core::simulator::JointMoments,
    k: usize,
) -> kalman_core::simulator::JointMoments {
    let sm = model.step(k).unwrap();
    kalman_core::simulator::JointMoments {
        mean_x: sm.phi * &m.mean_x,
        mean_z: m.mean_z.clone(),
        cov_xx: sm.phi * &m.cov_xx * sm.phi.transpose() + sm.q.matrix(),
        cov_x_z: sm.phi * &m.cov_x_z,
        cov_zz: m.cov_zz.clone(),
    }
}

#[test]
fn semidefinite_process_noise_is_supported_end_to_end() {
    let mut r = rng(15);
    let n = 2;
    let model = kalman_core::StateSpaceModel::constant(
        random::transition(&mut r, n),
        random::uniform_matrix(&mut r, 1, n),
        SpdMatrix::certify_computed(Matrix::zeros(n, n), Definiteness::SemiDefinite).unwrap(),
        random::spd_matrix(&mut r, 1),
    )
    .unwrap();
    let p0 = random::spd_matrix(&mut r, n);
    let x0 = Vector::zeros(n);
    let traj = sample_trajectory(&model, &x0, &p0, 8, 3).unwrap();
    let trace = projection_filter_run(&model, &traj.measurements, &x0, &p0).unwrap();
    let moments = propagate_moments(&model, &x0, &p0, 8).unwrap();
    let (xk, cov) = batch_oracle_estimate(&moments, &stack_measurements(&traj.measurements)).unwrap();
    let post = trace.last_posterior().unwrap();
    assert!(relative_deviation(post.mean.as_slice(), xk.as_slice()) <= 1e-8);
    assert!(rel(post.cov.matrix(), &cov) <= 1e-8);
}

#[test]
fn filter_runs_agree_step_for_step() {
    let mut r = rng(16);
    for form in [CovarianceForm::Standard, CovarianceForm::Joseph] {
        for _ in 0..20 {
            let n = r.random_range(1..=6);
            let m = r.random_range(1..=6);
            let model = random::state_space_model(&mut r, n, m).unwrap();
            let p0 = random::spd_matrix(&mut r, n);
            let x0 = random::uniform_vector(&mut r, n);
            let traj = sample_trajectory(&model, &x0, &p0, 49, r.random::<u64>()).unwrap();
            let a = projection_filter_run(&model, &traj.measurements, &x0, &p0).unwrap();
            let b = bayes_filter_run(&model, &traj.measurements, &x0, &p0, form).unwrap();
            let worst = step_deviations(&a, &b).into_iter().fold(0.0, f64::max);
            let bound = if form == CovarianceForm::Standard { 1e-12 } else { 1e-10 };
            assert!(worst <= bound, "{form:?}: {worst}");
        }
    }
}
