//! Reduction of the pair Hamiltonian to the four-state spin subspace and
//! extraction of the effective spin interaction coefficients.
//!
//! Two reduction backends are provided: the second-order perturbative
//! formula (fast, valid away from intermediate-state resonances) and the
//! exact direct-rotation block diagonalization (selects the four
//! eigenstates with maximal spin-subspace overlap and applies the
//! polar-decomposition unitary closest to the identity).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, RydError};
use crate::linalg::{davidson_targeted, sym_eigen, DavidsonOptions, SymOp};
use crate::pair::{AngularCoupling, PairOperator, PairProblem};

/// Reduction backend used to produce an `EffectivePair`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwMethod {
    SecondOrder,
    Exact,
}

/// Guard threshold below which a second-order energy denominator is
/// considered resonant, h*Hz.
pub const DEFAULT_RESONANCE_GUARD_HZ: f64 = 5.0e4;

/// Couplings below this magnitude never trigger the resonance guard, h*Hz.
const GUARD_COUPLING_FLOOR_HZ: f64 = 1.0;

/// Basis size up to which exact reductions use dense diagonalization.
const DENSE_EIGEN_LIMIT: usize = 1500;

/// Effective 4x4 pair Hamiltonian over {up up, up down, down up, down down}
/// (atom j first), h*Hz, with the first-order dipolar part bookkept
/// separately.
#[derive(Debug, Clone)]
pub struct EffectivePair {
    /// Full effective Hamiltonian including the one-body diagonal.
    pub h_eff: DMatrix<Complex64>,
    /// First-order dipolar block <p|V|p'> (falls off as 1/R^3).
    pub first_order: DMatrix<Complex64>,
    /// Unperturbed spin pair energies, h*Hz.
    pub p_energies: [f64; 4],
    pub method: SwMethod,
}

impl EffectivePair {
    /// Effective interaction V_eff = h_eff - diag(E_p).
    pub fn interaction(&self) -> DMatrix<Complex64> {
        let mut v = self.h_eff.clone();
        for p in 0..4 {
            v[(p, p)] -= Complex64::new(self.p_energies[p], 0.0);
        }
        v
    }

    /// Second- and higher-order part (falls off as 1/R^6 at leading order).
    pub fn beyond_first_order(&self) -> DMatrix<Complex64> {
        self.interaction() - &self.first_order
    }

    /// Largest deviation from Hermiticity, h*Hz.
    pub fn asymmetry(&self) -> f64 {
        let adj = self.h_eff.adjoint();
        (&self.h_eff - adj).camax()
    }
}

/// Second-order reduction over an arbitrary dense Hamiltonian whose first
/// `p_dim` basis states form the target subspace. Returns the effective
/// `p_dim` x `p_dim` block.
pub fn sw_second_order_matrix(
    h: &DMatrix<Complex64>,
    p_dim: usize,
    guard_hz: f64,
) -> Result<DMatrix<Complex64>> {
    let n = h.nrows();
    if h.ncols() != n || p_dim > n {
        return Err(RydError::DimensionMismatch {
            details: format!("{}x{} matrix with p_dim {p_dim}", h.nrows(), h.ncols()),
        });
    }
    let energies: Vec<f64> = (0..n).map(|i| h[(i, i)].re).collect();
    let mut eff = DMatrix::zeros(p_dim, p_dim);
    for p in 0..p_dim {
        for pp in 0..p_dim {
            let mut acc = if p == pp {
                Complex64::new(energies[p], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            acc += h[(p, pp)];
            for q in p_dim..n {
                let vpq = h[(p, q)];
                let vqpp = h[(q, pp)];
                let gap_p = energies[p] - energies[q];
                let gap_pp = energies[pp] - energies[q];
                let gap = gap_p.abs().min(gap_pp.abs());
                if gap < guard_hz {
                    // negligible couplings are skipped rather than flagged
                    if vpq.norm() <= GUARD_COUPLING_FLOOR_HZ
                        && vqpp.norm() <= GUARD_COUPLING_FLOOR_HZ
                    {
                        continue;
                    }
                    return Err(RydError::NearResonantIntermediate {
                        q_index: q,
                        gap_hz: gap,
                    });
                }
                acc += vpq * vqpp * (0.5 * (1.0 / gap_p + 1.0 / gap_pp));
            }
            eff[(p, pp)] = acc;
        }
    }
    Ok(eff)
}

/// Second-order Schrieffer-Wolff reduction of a pair problem at one
/// geometry. Fast path: only the four spin columns of V are evaluated.
pub fn sw_second_order(
    prob: &PairProblem,
    v: &AngularCoupling,
    guard_hz: f64,
) -> Result<EffectivePair> {
    let op = prob.operator(v);
    let n = prob.n_basis();
    // columns[p][i] = <i|V|p>
    let columns: Vec<Vec<Complex64>> = (0..4).map(|p| op.interaction_column(p)).collect();
    let e = prob.energies();
    let mut first_order = DMatrix::zeros(4, 4);
    let mut h_eff = DMatrix::zeros(4, 4);
    for p in 0..4 {
        for pp in 0..4 {
            // <p|V|pp> = conj(<pp|V|p>) = columns[pp][p]
            let v_pp = columns[pp][p];
            first_order[(p, pp)] = v_pp;
            let mut acc = v_pp;
            if p == pp {
                acc += Complex64::new(e[p], 0.0);
            }
            for q in 4..n {
                // <p|V|q> = conj(columns[p][q]); <q|V|pp> = columns[pp][q]
                let vpq = columns[p][q].conj();
                let vqpp = columns[pp][q];
                if vpq.norm() == 0.0 && vqpp.norm() == 0.0 {
                    continue;
                }
                let gap_p = e[p] - e[q];
                let gap_pp = e[pp] - e[q];
                let gap = gap_p.abs().min(gap_pp.abs());
                if gap < guard_hz {
                    if vpq.norm() <= GUARD_COUPLING_FLOOR_HZ
                        && vqpp.norm() <= GUARD_COUPLING_FLOOR_HZ
                    {
                        continue;
                    }
                    return Err(RydError::NearResonantIntermediate {
                        q_index: q,
                        gap_hz: gap,
                    });
                }
                acc += vpq * vqpp * (0.5 * (1.0 / gap_p + 1.0 / gap_pp));
            }
            h_eff[(p, pp)] = acc;
        }
    }
    // restore the absolute energy origin on the diagonal
    let mut p_energies = [0.0; 4];
    for p in 0..4 {
        p_energies[p] = e[p] + prob.e0;
        h_eff[(p, p)] += Complex64::new(prob.e0, 0.0);
    }
    Ok(EffectivePair {
        h_eff,
        first_order,
        p_energies,
        method: SwMethod::SecondOrder,
    })
}

/// One eigenpair of the pair Hamiltonian with its spin-subspace overlap.
#[derive(Debug, Clone)]
pub struct OverlapEigenpair {
    /// Eigenvalue, h*Hz, absolute scale.
    pub value: f64,
    /// Amplitudes over the pair basis.
    pub vector: Vec<Complex64>,
    /// Total squared weight on the four spin states.
    pub p_overlap: f64,
}

fn p_overlap_of(vector: &[Complex64]) -> f64 {
    vector.iter().take(4).map(|z| z.norm_sqr()).sum()
}

/// Dense Hermitian matrix of the pair problem at one geometry (small bases).
pub fn dense_pair_matrix(prob: &PairProblem, v: &AngularCoupling) -> DMatrix<Complex64> {
    let op = prob.operator(v);
    let n = prob.n_basis();
    let e = prob.energies();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let col = op.interaction_column(i);
        for j in 0..n {
            h[(j, i)] = col[j];
        }
        h[(i, i)] += Complex64::new(e[i], 0.0);
    }
    h
}

fn dense_top_overlap_eigenpairs(
    h: &DMatrix<Complex64>,
    e0: f64,
    k: usize,
) -> Result<Vec<OverlapEigenpair>> {
    let n = h.nrows();
    let real = h.iter().all(|z| z.im.abs() < 1e-12 * (1.0 + z.re.abs()));
    let (values, vectors): (DVector<f64>, DMatrix<Complex64>) = if real {
        let hr = h.map(|z| z.re);
        let (vals, vecs) = sym_eigen(&hr)?;
        (vals, vecs.map(|x| Complex64::new(x, 0.0)))
    } else {
        let eig = h.clone().symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors)
    };
    let mut pairs: Vec<OverlapEigenpair> = (0..n)
        .map(|i| {
            let vec: Vec<Complex64> = vectors.column(i).iter().copied().collect();
            let p_overlap = p_overlap_of(&vec);
            OverlapEigenpair {
                value: values[i] + e0,
                vector: vec,
                p_overlap,
            }
        })
        .collect();
    pairs.sort_by(|a, b| {
        b.p_overlap
            .total_cmp(&a.p_overlap)
            .then_with(|| a.value.total_cmp(&b.value))
    });
    pairs.truncate(k);
    Ok(pairs)
}

fn davidson_top_overlap_eigenpairs(
    prob: &PairProblem,
    op: &PairOperator<'_>,
    k: usize,
    opts: &DavidsonOptions,
) -> Result<Vec<OverlapEigenpair>> {
    let n = prob.n_basis();
    let targets = op.target_sets();
    // In the doubled-real representation every physical eigenpair appears
    // twice; request extra vectors and deduplicate.
    let want = if op.is_complex() { 2 * k + 2 } else { k + 2 };
    let ritz = davidson_targeted(op, &targets, want.min(op.dim()), opts)?;
    let mut pairs: Vec<OverlapEigenpair> = Vec::new();
    for r in &ritz {
        let vec: Vec<Complex64> = if op.is_complex() {
            (0..n)
                .map(|i| Complex64::new(r.vector[i], r.vector[n + i]))
                .collect()
        } else {
            r.vector.iter().map(|x| Complex64::new(*x, 0.0)).collect()
        };
        let norm: f64 = vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let vec: Vec<Complex64> = vec.into_iter().map(|z| z / norm).collect();
        // drop duplicates of an already collected eigenvector
        let dup = pairs.iter().any(|p| {
            let ip: Complex64 = p
                .vector
                .iter()
                .zip(&vec)
                .map(|(a, b)| a.conj() * b)
                .sum();
            ip.norm() > 0.99
        });
        if !dup {
            let p_overlap = p_overlap_of(&vec);
            pairs.push(OverlapEigenpair {
                value: r.value + prob.e0,
                vector: vec,
                p_overlap,
            });
        }
    }
    pairs.sort_by(|a, b| {
        b.p_overlap
            .total_cmp(&a.p_overlap)
            .then_with(|| a.value.total_cmp(&b.value))
    });
    pairs.truncate(k);
    Ok(pairs)
}

/// The `k` eigenpairs of the pair Hamiltonian with the largest
/// spin-subspace overlap, via dense diagonalization for small bases and
/// the targeted iterative solver otherwise.
pub fn top_overlap_eigenpairs(
    prob: &PairProblem,
    v: &AngularCoupling,
    k: usize,
    opts: &DavidsonOptions,
) -> Result<Vec<OverlapEigenpair>> {
    if prob.n_basis() <= DENSE_EIGEN_LIMIT {
        let h = dense_pair_matrix(prob, v);
        dense_top_overlap_eigenpairs(&h, prob.e0, k)
    } else {
        let op = prob.operator(v);
        davidson_top_overlap_eigenpairs(prob, &op, k, opts)
    }
}

fn direct_rotation_from_pairs(
    selected: &[OverlapEigenpair],
    method_energies: [f64; 4],
    first_order: DMatrix<Complex64>,
) -> Result<EffectivePair> {
    // Overlap matrix A[p][i] = <p|Phi_i>
    let mut a = DMatrix::zeros(4, 4);
    for (i, pair) in selected.iter().enumerate() {
        for p in 0..4 {
            a[(p, i)] = pair.vector[p];
        }
    }
    let svd = a.clone().svd(true, true);
    let sigma_min = svd.singular_values.min();
    if sigma_min < 1e-6 {
        return Err(RydError::SingularOverlap { sigma_min });
    }
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    // closest unitary to A (polar decomposition)
    let rot = u * vt;
    let lambda = DMatrix::from_diagonal(&DVector::from_iterator(
        4,
        selected.iter().map(|p| Complex64::new(p.value, 0.0)),
    ));
    let h_eff = &rot * lambda * rot.adjoint();
    Ok(EffectivePair {
        h_eff,
        first_order,
        p_energies: method_energies,
        method: SwMethod::Exact,
    })
}

/// Exact Schrieffer-Wolff reduction by direct rotation: selects the four
/// eigenstates with maximal spin-subspace overlap and block-diagonalizes
/// with the unitary closest to the identity. The spectrum of the returned
/// 4x4 block equals the four selected eigenvalues.
pub fn sw_exact_direct_rotation(
    prob: &PairProblem,
    v: &AngularCoupling,
    opts: &DavidsonOptions,
) -> Result<EffectivePair> {
    let pairs = top_overlap_eigenpairs(prob, v, 5, opts)?;
    if pairs.len() < 4 {
        return Err(RydError::EigenNotConverged {
            details: format!(
                "only {} distinct eigenpairs found for the spin subspace",
                pairs.len()
            ),
        });
    }
    if pairs.len() >= 5 {
        let diff = pairs[3].p_overlap - pairs[4].p_overlap;
        if diff < 1e-8 {
            return Err(RydError::DegenerateSelection { diff });
        }
    }
    let op = prob.operator(v);
    let mut first_order = DMatrix::zeros(4, 4);
    for pp in 0..4 {
        let col = op.interaction_column(pp);
        for p in 0..4 {
            first_order[(p, pp)] = col[p];
        }
    }
    let e = prob.energies();
    let p_energies = [
        e[0] + prob.e0,
        e[1] + prob.e0,
        e[2] + prob.e0,
        e[3] + prob.e0,
    ];
    direct_rotation_from_pairs(&pairs[..4], p_energies, first_order)
}

/// Exact reduction of an arbitrary dense Hamiltonian whose first `p_dim`
/// states form the target subspace (small/toy problems).
pub fn sw_exact_matrix(h: &DMatrix<Complex64>, p_dim: usize) -> Result<DMatrix<Complex64>> {
    let n = h.nrows();
    if h.ncols() != n || p_dim > n {
        return Err(RydError::DimensionMismatch {
            details: format!("{}x{} matrix with p_dim {p_dim}", h.nrows(), h.ncols()),
        });
    }
    let eig = h.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    let overlap = |i: usize| -> f64 {
        (0..p_dim)
            .map(|p| eig.eigenvectors[(p, i)].norm_sqr())
            .sum()
    };
    idx.sort_by(|&a, &b| {
        overlap(b)
            .total_cmp(&overlap(a))
            .then_with(|| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
    });
    if n > p_dim {
        let diff = overlap(idx[p_dim - 1]) - overlap(idx[p_dim]);
        if diff < 1e-8 {
            return Err(RydError::DegenerateSelection { diff });
        }
    }
    let mut a = DMatrix::zeros(p_dim, p_dim);
    for (col, &i) in idx.iter().take(p_dim).enumerate() {
        for p in 0..p_dim {
            a[(p, col)] = eig.eigenvectors[(p, i)];
        }
    }
    let svd = a.svd(true, true);
    let sigma_min = svd.singular_values.min();
    if sigma_min < 1e-6 {
        return Err(RydError::SingularOverlap { sigma_min });
    }
    let rot = svd.u.as_ref().unwrap() * svd.v_t.as_ref().unwrap();
    let lambda = DMatrix::from_diagonal(&DVector::from_iterator(
        p_dim,
        idx.iter()
            .take(p_dim)
            .map(|&i| Complex64::new(eig.eigenvalues[i], 0.0)),
    ));
    Ok(&rot * lambda * rot.adjoint())
}

/// The full set of effective spin coefficients of one ordered atom pair,
/// h*Hz. Together with the unperturbed energies these 16 real degrees of
/// freedom reconstruct the 4x4 effective Hamiltonian exactly.
#[derive(Debug, Clone, Copy)]
pub struct SpinCoefficients {
    /// Diagonal interaction shifts U in the order {up up, up down, down up,
    /// down down} (atom j first).
    pub u: [f64; 4],
    /// Spin exchange <up down|V_eff|down up>.
    pub c_pm: Complex64,
    /// Double raise <up up|V_eff|down down>.
    pub c_pp: Complex64,
    /// Single-raise contribution on atom j (pair term of the C_+ sum).
    pub c_p_j: Complex64,
    /// Single-raise contribution on atom k.
    pub c_p_k: Complex64,
    /// Raise on atom j conditioned on the neighbor spin (C_{+z}, j raised).
    pub c_pz: Complex64,
    /// Raise on atom k conditioned on the neighbor spin (C_{+z}, k raised).
    pub c_zp: Complex64,
    /// Longitudinal coupling U_uu - U_ud - U_du + U_dd.
    pub c_zz: f64,
    /// Spin-subspace isolation measure (fourth-largest overlap), in (0, 1].
    pub kappa: f64,
}

/// Extract the effective spin coefficients from a reduced pair Hamiltonian.
pub fn extract_pair_coefficients(eff: &EffectivePair, kappa: f64) -> Result<SpinCoefficients> {
    let asym = eff.asymmetry();
    let scale = eff.interaction().camax().max(1.0);
    if asym > 1e-6 * scale {
        return Err(RydError::NotHermitian { asym });
    }
    let v = eff.interaction();
    let u = [v[(0, 0)].re, v[(1, 1)].re, v[(2, 2)].re, v[(3, 3)].re];
    let c_p_j = (v[(0, 2)] + v[(1, 3)]) * 0.5;
    let c_p_k = (v[(0, 1)] + v[(2, 3)]) * 0.5;
    Ok(SpinCoefficients {
        u,
        c_pm: v[(1, 2)],
        c_pp: v[(0, 3)],
        c_p_j,
        c_p_k,
        c_pz: v[(0, 2)] - v[(1, 3)],
        c_zp: v[(0, 1)] - v[(2, 3)],
        c_zz: u[0] - u[1] - u[2] + u[3],
        kappa,
    })
}

impl SpinCoefficients {
    /// Rebuild the 4x4 effective Hamiltonian from the coefficient ledger.
    /// Exact inverse of `extract_pair_coefficients`.
    pub fn reconstruct(&self, p_energies: &[f64; 4]) -> DMatrix<Complex64> {
        let mut h = DMatrix::zeros(4, 4);
        for p in 0..4 {
            h[(p, p)] = Complex64::new(p_energies[p] + self.u[p], 0.0);
        }
        let half = Complex64::new(0.5, 0.0);
        h[(1, 2)] = self.c_pm;
        h[(0, 3)] = self.c_pp;
        h[(0, 2)] = self.c_p_j + half * self.c_pz;
        h[(1, 3)] = self.c_p_j - half * self.c_pz;
        h[(0, 1)] = self.c_p_k + half * self.c_zp;
        h[(2, 3)] = self.c_p_k - half * self.c_zp;
        for p in 0..4 {
            for pp in (p + 1)..4 {
                h[(pp, p)] = h[(p, pp)].conj();
            }
        }
        h
    }
}

/// Spin-subspace isolation report.
#[derive(Debug, Clone)]
pub struct KappaReport {
    /// Fourth-largest spin-subspace overlap among all eigenstates.
    pub kappa: f64,
    /// The four largest overlaps, descending.
    pub overlaps: [f64; 4],
    /// Eigenvalues of the four selected eigenstates, h*Hz.
    pub eigenvalues: [f64; 4],
}

/// Compute the spin-subspace isolation measure for one geometry.
pub fn compute_kappa(
    prob: &PairProblem,
    v: &AngularCoupling,
    opts: &DavidsonOptions,
) -> Result<KappaReport> {
    let pairs = top_overlap_eigenpairs(prob, v, 4, opts)?;
    if pairs.len() < 4 {
        return Err(RydError::EigenNotConverged {
            details: "fewer than four eigenpairs with spin-subspace weight".into(),
        });
    }
    let mut overlaps = [0.0; 4];
    let mut eigenvalues = [0.0; 4];
    for (i, p) in pairs.iter().take(4).enumerate() {
        overlaps[i] = p.p_overlap;
        eigenvalues[i] = p.value;
    }
    Ok(KappaReport {
        kappa: overlaps[3],
        overlaps,
        eigenvalues,
    })
}
