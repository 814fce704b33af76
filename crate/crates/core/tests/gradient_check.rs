//! Central finite-difference validation of the classifier's BCE gradients,
//! per parameter tensor, including the batchnorm scale and shift.

use coversearch::predictor::{ForwardMode, NeuralClassifier};
use coversearch::rng::substream;
use ndarray::Array2;
use rand::Rng;

const FD_STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
/// Below this magnitude the FD quotient is roundoff-dominated; such entries
/// must still agree absolutely.
const TINY_GRAD: f64 = 1e-7;
const ABS_TOL: f64 = 1e-9;

fn random_batch(dim: usize, rows: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = substream(seed, "batch");
    let data: Vec<f64> = (0..rows * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let x = Array2::from_shape_vec((rows, dim), data).unwrap();
    // both classes present
    let y: Vec<f64> = (0..rows).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
    (x, y)
}

fn check_all_tensors(
    mut clf: NeuralClassifier,
    x: Array2<f64>,
    y: Vec<f64>,
    allowed_zero: &[&str],
) {
    let (_, grads) = clf.loss_and_gradients(x.view(), &y).unwrap();
    let analytic = grads.flatten();
    let theta = clf.parameters();
    assert_eq!(analytic.len(), theta.len());

    let mut fd = vec![0.0; theta.len()];
    for i in 0..theta.len() {
        let mut plus = theta.clone();
        plus[i] += FD_STEP;
        clf.set_parameters(&plus).unwrap();
        let lp = clf.batch_loss(x.view(), &y, ForwardMode::Train).unwrap();
        let mut minus = theta.clone();
        minus[i] -= FD_STEP;
        clf.set_parameters(&minus).unwrap();
        let lm = clf.batch_loss(x.view(), &y, ForwardMode::Train).unwrap();
        fd[i] = (lp - lm) / (2.0 * FD_STEP);
    }
    clf.set_parameters(&theta).unwrap();

    for (name, span) in clf.tensor_spans() {
        let mut worst_rel: f64 = 0.0;
        let mut healthy = 0usize;
        for i in span.clone() {
            let (a, b) = (analytic[i], fd[i]);
            let scale = a.abs().max(b.abs());
            if scale < TINY_GRAD {
                assert!(
                    (a - b).abs() < ABS_TOL,
                    "{name}[{}]: tiny gradients disagree: analytic {a}, fd {b}",
                    i - span.start
                );
            } else {
                healthy += 1;
                worst_rel = worst_rel.max((a - b).abs() / scale);
            }
        }
        assert!(
            worst_rel < REL_TOL,
            "tensor {name}: max relative error {worst_rel:.3e} over {healthy} entries"
        );
        if allowed_zero.contains(&name) {
            // tensors whose effect batchnorm cancels exactly (the
            // first-layer bias always; w1 and gamma too on a batch of one):
            // analytic and FD both vanish, which the absolute check above
            // already confirmed
            assert_eq!(healthy, 0, "{name} unexpectedly has nonzero gradient");
        } else {
            assert!(healthy > 0, "tensor {name} has no gradient signal at all");
        }
    }
}

#[test]
fn gradients_match_finite_differences_small_net() {
    let mut rng = substream(0, "clf");
    let clf = NeuralClassifier::with_hidden(6, 10, 7, &mut rng).unwrap();
    let (x, y) = random_batch(6, 10, 1);
    check_all_tensors(clf, x, y, &["b1"]);
}

/// Same check at the production hidden sizes (256, 128) on a 10-sample
/// batch; only the input dimension is reduced to keep the FD sweep fast.
#[test]
fn gradients_match_finite_differences_default_hidden_sizes() {
    let mut rng = substream(2, "clf");
    let clf = NeuralClassifier::new(8, &mut rng).unwrap();
    let (x, y) = random_batch(8, 10, 3);
    check_all_tensors(clf, x, y, &["b1"]);
}

/// Degenerate single-sample batch: batch statistics collapse the normalized
/// activations (and the w1/gamma gradients) to zero, and the remaining
/// gradients must still match. Biases are perturbed off their zero init so
/// the later layers carry signal.
#[test]
fn gradients_match_on_batch_of_one() {
    let mut rng = substream(4, "clf");
    let mut clf = NeuralClassifier::with_hidden(5, 6, 4, &mut rng).unwrap();
    let mut noise = substream(5, "noise");
    let jittered: Vec<f64> =
        clf.parameters().iter().map(|v| v + noise.random_range(-0.5..0.5)).collect();
    clf.set_parameters(&jittered).unwrap();
    let (x, y) = random_batch(5, 1, 5);
    check_all_tensors(clf, x, y, &["w1", "b1", "gamma"]);
}
