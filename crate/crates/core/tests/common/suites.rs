//! Randomized identity suites, each driven by a deterministic proptest runner.

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use trpca::linalg::{op_norm, singular_values};
use trpca::metrics::{condition_numbers, matrix_sparsity_fraction, sparse_norm_bounds_check};
use trpca::tensor::{inner, kron, matricize, multilinear_mul};
use trpca::{gen_truth, hosvd, soft_shrink, DenseMatrix, DenseTensor, TruthSpec, TuckerFactors};

use super::{rand_matrix, rand_tensor, rel_diff, rel_diff_t, rng};

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn dims3() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..6, 3)
}

/// `(A_1, A_2, A_3) . ((B_1, B_2, B_3) . G) == (A_1 B_1, A_2 B_2, A_3 B_3) . G`.
pub fn multilinear_composition(cases: u32) -> Result<(), String> {
    run(cases, (dims3(), dims3(), dims3(), any::<u64>()), |(n, p, m, seed)| {
        let mut r = rng(seed);
        let g = rand_tensor(&mut r, &n);
        let b: Vec<DenseMatrix> = (0..3).map(|k| rand_matrix(&mut r, p[k], n[k])).collect();
        let a: Vec<DenseMatrix> = (0..3).map(|k| rand_matrix(&mut r, m[k], p[k])).collect();
        let ab: Vec<DenseMatrix> = (0..3).map(|k| a[k].dot(&b[k])).collect();
        let inner_prod = multilinear_mul(&b.iter().map(Some).collect::<Vec<_>>(), &g).unwrap();
        let lhs = multilinear_mul(&a.iter().map(Some).collect::<Vec<_>>(), &inner_prod).unwrap();
        let rhs = multilinear_mul(&ab.iter().map(Some).collect::<Vec<_>>(), &g).unwrap();
        prop_assert!(rel_diff_t(&lhs, &rhs) <= 1e-10);
        Ok(())
    })
}

/// `M_k((U_1, U_2, U_3) . G) == U_k M_k(G) (U_c ⊗ U_b)ᵀ` with the other modes descending.
pub fn matricization_identities(cases: u32) -> Result<(), String> {
    run(cases, (dims3(), dims3(), any::<u64>()), |(r, n, seed)| {
        let mut rg = rng(seed);
        let g = rand_tensor(&mut rg, &r);
        let u: Vec<DenseMatrix> = (0..3).map(|k| rand_matrix(&mut rg, n[k], r[k])).collect();
        let x = multilinear_mul(&u.iter().map(Some).collect::<Vec<_>>(), &g).unwrap();
        for k in 0..3 {
            let others: Vec<usize> = (0..3).rev().filter(|&j| j != k).collect();
            let kr = kron(&u[others[0]], &u[others[1]]);
            let rhs = u[k].dot(&matricize(&g, k).unwrap()).dot(&kr.t());
            prop_assert!(rel_diff(&matricize(&x, k).unwrap(), &rhs) <= 1e-10, "mode {}", k);
        }
        Ok(())
    })
}

/// `⟨(U_1, U_2, U_3) . G, X⟩ == ⟨G, (U_1ᵀ, U_2ᵀ, U_3ᵀ) . X⟩`.
pub fn inner_product_adjoint(cases: u32) -> Result<(), String> {
    run(cases, (dims3(), dims3(), any::<u64>()), |(r, n, seed)| {
        let mut rg = rng(seed);
        let g = rand_tensor(&mut rg, &r);
        let x = rand_tensor(&mut rg, &n);
        let u: Vec<DenseMatrix> = (0..3).map(|k| rand_matrix(&mut rg, n[k], r[k])).collect();
        let ut: Vec<DenseMatrix> = u.iter().map(|m| m.t().to_owned()).collect();
        let lhs = inner(&multilinear_mul(&u.iter().map(Some).collect::<Vec<_>>(), &g).unwrap(), &x).unwrap();
        let rhs = inner(&g, &multilinear_mul(&ut.iter().map(Some).collect::<Vec<_>>(), &x).unwrap()).unwrap();
        let scale = g.fro_norm() * x.fro_norm() * u.iter().map(|m| m.iter().map(|v| v * v).sum::<f64>().sqrt()).product::<f64>();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0));
        Ok(())
    })
}

fn hosvd_case(seed: u64) -> (DenseTensor, TuckerFactors) {
    let mut rg = rng(seed);
    let t = rand_tensor(&mut rg, &[5, 6, 7]);
    let f = hosvd(&t, &[2, 3, 2]).unwrap();
    (t, f)
}

/// A 5x6x7 tensor whose multilinear rank is exactly (2, 3, 2), with its HOSVD at that rank.
fn exact_rank_case(seed: u64) -> (DenseTensor, TuckerFactors) {
    let mut rg = rng(seed);
    let ranks = [2, 3, 2];
    let u: Vec<DenseMatrix> = [5, 6, 7].iter().zip(ranks).map(|(&n, r)| rand_matrix(&mut rg, n, r)).collect();
    let t = multilinear_mul(&u.iter().map(Some).collect::<Vec<_>>(), &rand_tensor(&mut rg, &ranks)).unwrap();
    let f = hosvd(&t, &ranks).unwrap();
    (t, f)
}

fn check_first_identity(t: &DenseTensor, f: &TuckerFactors) -> Result<(), TestCaseError> {
    for k in 0..3 {
        let m = matricize(t, k).unwrap();
        let breve = f.breve_factor(k).unwrap();
        let lhs = f.factors[k].t().dot(&m).dot(&breve);
        prop_assert!(rel_diff(&lhs, &breve.t().dot(&breve)) <= 1e-8, "mode {}", k);
    }
    Ok(())
}

fn check_second_identity(t: &DenseTensor, f: &TuckerFactors) -> Result<(), TestCaseError> {
    for k in 0..3 {
        let m = matricize(t, k).unwrap();
        let u = &f.factors[k];
        let breve = f.breve_factor(k).unwrap();
        let lhs = m.dot(&m.t()).dot(u);
        let err = rel_diff(&lhs, &u.dot(&breve.t().dot(&breve)));
        prop_assert!(err <= 1e-8, "mode {} mismatch {:e}", k, err);
    }
    Ok(())
}

fn check_all_orthogonal(f: &TuckerFactors) -> Result<(), TestCaseError> {
    for k in 0..3 {
        let m = matricize(&f.core, k).unwrap();
        let g = m.dot(&m.t());
        let scale = g.diag().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for ((i, j), v) in g.indexed_iter() {
            if i != j {
                prop_assert!(v.abs() <= 1e-9 * scale, "mode {} entry ({}, {}) = {:e}", k, i, j, v);
            }
        }
    }
    Ok(())
}

/// `U^(k)ᵀ M_k(T) Ŭ^(k) == Ŭ^(k)ᵀ Ŭ^(k)` for the rank-(2,3,2) HOSVD of a random 5x6x7 tensor.
pub fn truncated_hosvd_first(cases: u32) -> Result<(), String> {
    run(cases, any::<u64>(), |seed| {
        let (t, f) = hosvd_case(seed);
        check_first_identity(&t, &f)
    })
}

/// `M_k(T) M_k(T)ᵀ U^(k) == U^(k) Ŭ^(k)ᵀ Ŭ^(k)` for the rank-(2,3,2) HOSVD of a random 5x6x7 tensor.
pub fn truncated_hosvd_second(cases: u32) -> Result<(), String> {
    run(cases, any::<u64>(), |seed| {
        let (t, f) = hosvd_case(seed);
        check_second_identity(&t, &f)
    })
}

/// `M_k(G) M_k(G)ᵀ` is diagonal for the rank-(2,3,2) HOSVD core of a random 5x6x7 tensor.
pub fn all_orthogonal_core(cases: u32) -> Result<(), String> {
    run(cases, any::<u64>(), |seed| {
        let (_, f) = hosvd_case(seed);
        check_all_orthogonal(&f)
    })
}

/// Both HOSVD identities and all-orthogonality when the tensor has multilinear rank `r`.
pub fn exact_rank_hosvd(cases: u32) -> Result<(), String> {
    run(cases, any::<u64>(), |seed| {
        let (t, f) = exact_rank_case(seed);
        check_first_identity(&t, &f)?;
        check_second_identity(&t, &f)?;
        check_all_orthogonal(&f)
    })
}

/// The full (untruncated) HOSVD core is all-orthogonal for any tensor.
pub fn full_hosvd_all_orthogonal(cases: u32) -> Result<(), String> {
    run(cases, (prop::collection::vec(1usize..6, 3), any::<u64>()), |(n, seed)| {
        let mut rg = rng(seed);
        let t = rand_tensor(&mut rg, &n);
        let ranks: Vec<usize> = (0..3).map(|k| n[k].min(n.iter().product::<usize>() / n[k])).collect();
        let f = hosvd(&t, &ranks).unwrap();
        check_all_orthogonal(&f)?;
        check_second_identity(&t, &f)
    })
}

/// Operator, ℓ2,∞ and ℓ1,∞ bounds for α-sparse matrices.
pub fn sparse_norm_bounds(cases: u32) -> Result<(), String> {
    run(cases, (1usize..16, 1usize..16, 0.0f64..1.0, any::<u64>()), |(m, n, p, seed)| {
        use rand::Rng;
        let mut rg = rng(seed);
        let s = DenseMatrix::from_shape_simple_fn((m, n), || {
            if rg.random::<f64>() < p {
                rg.random_range(-5.0..5.0)
            } else {
                0.0
            }
        });
        let alpha = matrix_sparsity_fraction(&s);
        let report = sparse_norm_bounds_check(&s, alpha).unwrap();
        prop_assert!(report.holds(), "{:?} at alpha {}", report, alpha);
        let direct = op_norm(&s).unwrap();
        prop_assert!(direct <= alpha * ((m * n) as f64).sqrt() * s.iter().fold(0.0f64, |a, v| a.max(v.abs())) * (1.0 + 1e-12) + 1e-300);
        Ok(())
    })
}

/// For `ζ ≥ ‖X − X⋆‖_∞`, `S = shrink(Y − X, ζ)` has support inside `supp(S⋆)`
/// and `‖S − S⋆‖_∞ ≤ 2ζ`.
pub fn corruption_estimate(cases: u32) -> Result<(), String> {
    run(cases, (dims3(), 0.0f64..0.5, 1.0f64..3.0, any::<u64>()), |(n, p, slack, seed)| {
        use rand::Rng;
        let mut rg = rng(seed);
        let x_star = rand_tensor(&mut rg, &n);
        let mut s_star = DenseTensor::zeros(&n);
        for v in s_star.values_mut() {
            if rg.random::<f64>() < p {
                *v = rg.random_range(-10.0..10.0);
            }
        }
        let noise = rand_tensor(&mut rg, &n).scaled(rg.random_range(0.0..0.5));
        let x = &x_star + &noise;
        let zeta = (&x - &x_star).inf_norm() * slack;
        let y = &x_star + &s_star;
        let s = soft_shrink(&(&y - &x), zeta).unwrap();
        for (a, b) in s.values().iter().zip(s_star.values()) {
            prop_assert!(*a == 0.0 || *b != 0.0, "support escaped");
        }
        prop_assert!((&s - &s_star).inf_norm() <= 2.0 * zeta * (1.0 + 1e-12) + 1e-13);
        Ok(())
    })
}

/// `‖X⋆‖_∞ ≤ sqrt(μ^N Π r / Π n) κ σ_min` on generated truths.
pub fn truth_entry_bound(cases: u32) -> Result<(), String> {
    run(cases, (3usize..10, 1usize..4, 1.0f64..20.0, any::<u64>()), |(n, r, kappa, seed)| {
        let r = r.min(n);
        let t = gen_truth(&TruthSpec::cube(n, r, kappa, 0.0, seed)).unwrap();
        let d = &t.diagnostics;
        let bound = (d.mu.powi(3) * (r * r * r) as f64 / (n * n * n) as f64).sqrt() * d.kappa * d.sigma_min;
        prop_assert!(t.x_star.inf_norm() <= bound * (1.0 + 1e-10), "{} > {}", t.x_star.inf_norm(), bound);
        Ok(())
    })
}

/// `κ ≤ κ_s` for any tensor and admissible rank.
pub fn kappa_below_kappa_s(cases: u32) -> Result<(), String> {
    run(cases, (prop::collection::vec(2usize..6, 3), prop::collection::vec(1usize..6, 3), any::<u64>()), |(n, r, seed)| {
        let mut rg = rng(seed);
        let t = rand_tensor(&mut rg, &n);
        let ranks: Vec<usize> = (0..3).map(|k| r[k].min(n[k]).min(n.iter().product::<usize>() / n[k])).collect();
        let c = condition_numbers(&t, &ranks).unwrap();
        prop_assert!(c.kappa <= c.kappa_s, "{} > {}", c.kappa, c.kappa_s);
        let top = singular_values(&matricize(&t, 0).unwrap()).unwrap()[0];
        prop_assert!(c.kappa_s >= top / c.sigma_min * (1.0 - 1e-12));
        Ok(())
    })
}

/// Every suite with its name.
pub fn all() -> Vec<(&'static str, fn(u32) -> Result<(), String>)> {
    vec![
        ("multilinear composition", multilinear_composition),
        ("matricization identities", matricization_identities),
        ("inner-product adjoint", inner_product_adjoint),
        ("truncated HOSVD first identity", truncated_hosvd_first),
        ("truncated HOSVD second identity", truncated_hosvd_second),
        ("all-orthogonal truncated core", all_orthogonal_core),
        ("exact-rank HOSVD identities", exact_rank_hosvd),
        ("full HOSVD all-orthogonal core", full_hosvd_all_orthogonal),
        ("sparse norm bounds", sparse_norm_bounds),
        ("corruption estimate", corruption_estimate),
        ("truth entry bound", truth_entry_bound),
        ("kappa <= kappa_s", kappa_below_kappa_s),
    ]
}
