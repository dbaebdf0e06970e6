use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pfr::dataset::EncodedMatrix;
use pfr::model::{train_logistic_with_summary, Solver, TrainConfig};

/// Plain gradient ascent to a tight tolerance is the reference optimum.
#[test]
fn newton_matches_gradient_ascent() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let n = 80;
        let d = 3;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let labels: Vec<u8> = rows
            .iter()
            .map(|r| u8::from(r[0] - r[1] + 0.6 * (rng.random::<f64>() - 0.5) > 0.0))
            .collect();
        let m = EncodedMatrix::from_rows(&["a", "b", "c"], &rows).unwrap();
        // strong enough curvature that a 1e-8 gradient pins the optimum to ~2e-7
        let newton = TrainConfig {
            l2_strength: 5e-2,
            tolerance: 1e-8,
            ..TrainConfig::default()
        };
        let gd = TrainConfig {
            solver: Solver::GradientAscent,
            learning_rate: 4.0,
            max_iterations: 400_000,
            ..newton.clone()
        };
        let (a, sa) = train_logistic_with_summary(&m, &labels, &newton, None).unwrap();
        let (b, sb) = train_logistic_with_summary(&m, &labels, &gd, None).unwrap();
        assert!(sa.converged && sb.converged, "{sa:?} {sb:?}");
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
        assert!((a.intercept() - b.intercept()).abs() < 1e-6);
    }
}
