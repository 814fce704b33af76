//! Direct-run convergence oracles for the baseline optimizers, with an
//! independent DE implementation as a cross-check.

use coversearch::optim::{cmaes, de, random_search};
use coversearch::problems::{BenchmarkFunction, BenchmarkObjective};
use coversearch::rng::substream;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Order-statistics bound: the nearest of 10k standard-normal draws in 2-d
/// lands well inside the 0.05 ball.
#[test]
fn random_search_2d_sphere() {
    let objective = (2usize, |x: &[f64]| sphere(x));
    let out = random_search::minimize(&objective, 10_000, 0).unwrap();
    assert!(out.best_fitness() < 0.05, "best {}", out.best_fitness());
    assert_eq!(out.evaluations, 10_000);
}

/// Minimal independent DE/rand/1/bin used only as an oracle.
fn reference_de(dim: usize, np: usize, f: f64, cr: f64, budget: usize, seed: u64) -> f64 {
    let mut rng = substream(seed, "reference-de");
    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut fit: Vec<f64> = pop.iter().map(|x| sphere(x)).collect();
    let mut evals = np;
    let mut best = fit.iter().cloned().fold(f64::INFINITY, f64::min);
    while evals + np <= budget {
        let snapshot = pop.clone();
        for i in 0..np {
            let pick = |rng: &mut rand_chacha::ChaCha8Rng, not: &[usize]| loop {
                let r = rng.random_range(0..np);
                if !not.contains(&r) {
                    return r;
                }
            };
            let r1 = pick(&mut rng, &[i]);
            let r2 = pick(&mut rng, &[i, r1]);
            let r3 = pick(&mut rng, &[i, r1, r2]);
            let j_rand = rng.random_range(0..dim);
            let mut trial = snapshot[i].clone();
            for j in 0..dim {
                if j == j_rand || rng.random::<f64>() < cr {
                    trial[j] = snapshot[r1][j] + f * (snapshot[r2][j] - snapshot[r3][j]);
                }
            }
            let tf = sphere(&trial);
            evals += 1;
            if tf <= fit[i] {
                pop[i] = trial;
                fit[i] = tf;
            }
            best = best.min(tf.min(fit[i]));
        }
    }
    best
}

#[test]
fn de_10d_sphere_within_40k_evaluations() {
    let objective = (10usize, |x: &[f64]| sphere(x));
    let out = de::minimize(&objective, 40_000, 40, 0.5, 0.9, 0).unwrap();
    assert!(out.best_fitness() < 1e-6, "best {}", out.best_fitness());
    assert_eq!(out.evaluations, 40_000);

    // the independent implementation agrees that this configuration solves
    // the problem inside the budget
    let reference_best = reference_de(10, 40, 0.5, 0.9, 40_000, 0);
    assert!(reference_best < 1e-6, "reference best {reference_best}");
}

#[test]
fn cmaes_10d_rosenbrock_within_30k_evaluations() {
    let objective = BenchmarkObjective { kind: BenchmarkFunction::Rosenbrock, dim: 10 };
    let out = cmaes::minimize(&objective, 30_000, 0.3, None, 0).unwrap();
    assert!(out.best_fitness() < 1e-6, "best {}", out.best_fitness());
    assert_eq!(out.evaluations, 30_000);
}

/// Performance ranking on the 512-d ellipsoid mirrors the qualitative
/// table ordering: LM-MA-ES beats full CMA-ES beats random search in
/// median best fitness over 5 seeds at an equal budget.
#[test]
fn high_dimensional_ellipsoid_ranking() {
    let objective = BenchmarkObjective { kind: BenchmarkFunction::Ellipsoid, dim: 512 };
    let budget = 26_400;
    let median = |mut v: Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let lme = median(
        (0..5u64)
            .map(|s| {
                coversearch::optim::lmmaes::minimize(&objective, budget, 0.3, None, s)
                    .unwrap()
                    .best_fitness()
            })
            .collect(),
    );
    let cma = median(
        (0..5u64)
            .map(|s| cmaes::minimize(&objective, budget, 0.3, None, s).unwrap().best_fitness())
            .collect(),
    );
    let rs = median(
        (0..5u64)
            .map(|s| random_search::minimize(&objective, budget, s).unwrap().best_fitness())
            .collect(),
    );
    assert!(lme <= cma, "lmmaes median {lme:.3e} worse than cmaes {cma:.3e}");
    assert!(cma <= rs, "cmaes median {cma:.3e} worse than random {rs:.3e}");
}

/// All three drivers respect the budget exactly and keep best-so-far
/// monotone on a multimodal function.
#[test]
fn budget_exactness_and_monotonicity_on_rastrigin() {
    let objective = BenchmarkObjective { kind: BenchmarkFunction::Rastrigin, dim: 6 };
    let budget = 3_001;
    let runs = [
        random_search::minimize(&objective, budget, 5).unwrap(),
        de::minimize(&objective, budget, 40, 0.5, 0.9, 5).unwrap(),
        cmaes::minimize(&objective, budget, 0.3, None, 5).unwrap(),
        coversearch::optim::lmmaes::minimize(&objective, budget, 0.3, None, 5).unwrap(),
    ];
    for out in &runs {
        assert_eq!(out.evaluations, budget);
        let mut prev = f64::INFINITY;
        for row in &out.trace {
            assert!(row.best_fitness <= prev);
            prev = row.best_fitness;
        }
        assert_eq!(out.trace.last().unwrap().evaluations_used, budget);
    }
}
