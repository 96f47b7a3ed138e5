//! Two-atom product basis and the anisotropic dipole-dipole pair Hamiltonian.
//!
//! The pair Hamiltonian over field-dressed product states is
//! H2 = h(j) + h(k) + V(j,k), with V expanded over spherical dipole
//! components as V = sum_{q',q} v_{q';q} d_{q'}(j) d_q(k). The product
//! basis is split into the four-state spin subspace P and a large
//! complement Q selected by energy and quantum-number windows.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::atomic::{
    dressed_dipole_matrices, AtomRegistry, DressedDipoleSet, DressedIndex, FieldConfig,
};
use crate::constants::DD_PREFACTOR_HZ_UM3;
use crate::error::{Result, RydError};
use crate::linalg::SymOp;
use crate::radial::{QuantumDefectTable, RadialCache};
use crate::species::SpinSpecies;

/// Relative separation of an atom pair in spherical coordinates with the
/// polar axis along the common field axis Z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    /// |R_jk| in micrometres, > 0.
    pub distance_um: f64,
    /// Polar angle in radians, stored reduced to [0, pi].
    pub theta: f64,
    /// Azimuthal angle in radians, stored reduced to [0, 2*pi).
    pub phi: f64,
}

impl PairGeometry {
    pub fn new(distance_um: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(distance_um > 0.0) || !distance_um.is_finite() {
            return Err(RydError::Config(format!(
                "pair distance must be positive and finite, got {distance_um}"
            )));
        }
        if !theta.is_finite() || !phi.is_finite() {
            return Err(RydError::Config("pair angles must be finite".into()));
        }
        let tau = 2.0 * std::f64::consts::PI;
        let mut t = theta.rem_euclid(tau);
        let mut p = phi;
        if t > std::f64::consts::PI {
            // reflect through the axis: (theta, phi) -> (2pi - theta, phi + pi)
            t = tau - t;
            p += std::f64::consts::PI;
        }
        let p = p.rem_euclid(tau);
        Ok(Self {
            distance_um,
            theta: t,
            phi: p,
        })
    }

    /// Cartesian separation vector (micrometres) for this geometry.
    pub fn to_cartesian(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [
            self.distance_um * st * cp,
            self.distance_um * st * sp,
            self.distance_um * ct,
        ]
    }

    /// Geometry of the separation vector between two points (micrometres).
    pub fn between(r_j: &[f64; 3], r_k: &[f64; 3]) -> Result<Self> {
        let dx = r_k[0] - r_j[0];
        let dy = r_k[1] - r_j[1];
        let dz = r_k[2] - r_j[2];
        let r = (dx * dx + dy * dy + dz * dz).sqrt();
        if r == 0.0 {
            return Err(RydError::Config(
                "two atoms share the same position".into(),
            ));
        }
        let theta = (dz / r).clamp(-1.0, 1.0).acos();
        let phi = dy.atan2(dx);
        Self::new(r, theta, phi)
    }
}

/// The nine dipole-dipole angular factors v_{q';q} including the
/// 1/(4 pi eps0 R^3) prefactor, in h*Hz per (e*a0)^2.
#[derive(Debug, Clone, Copy)]
pub struct AngularCoupling {
    /// Indexed as v[q' + 1][q + 1].
    pub v: [[Complex64; 3]; 3],
}

impl AngularCoupling {
    pub fn get(&self, q_prime: i32, q: i32) -> Complex64 {
        self.v[(q_prime + 1) as usize][(q + 1) as usize]
    }

    /// True when every factor is purely real (phi = 0 plane).
    pub fn is_real(&self) -> bool {
        self.v
            .iter()
            .flatten()
            .all(|z| z.im.abs() < 1e-14 * (1.0 + z.re.abs()))
    }
}

/// Evaluate the dipole-dipole angular factors for a pair geometry.
pub fn angular_factors(geometry: &PairGeometry) -> AngularCoupling {
    let r3 = geometry.distance_um.powi(3);
    let k = DD_PREFACTOR_HZ_UM3 / r3;
    let (st, ct) = geometry.theta.sin_cos();
    let phase = |mult: f64| Complex64::from_polar(1.0, -mult * geometry.phi);

    let w = k * (1.0 - 3.0 * ct * ct);
    let sc = k * 3.0 / std::f64::consts::SQRT_2 * st * ct;
    let ss = -k * 1.5 * st * st;

    let mut v = [[Complex64::new(0.0, 0.0); 3]; 3];
    let set = |v: &mut [[Complex64; 3]; 3], qp: i32, q: i32, z: Complex64| {
        v[(qp + 1) as usize][(q + 1) as usize] = z;
    };
    set(&mut v, 0, 0, Complex64::new(w, 0.0));
    set(&mut v, 1, -1, Complex64::new(0.5 * w, 0.0));
    set(&mut v, -1, 1, Complex64::new(0.5 * w, 0.0));
    set(&mut v, 0, 1, sc * phase(1.0));
    set(&mut v, 1, 0, sc * phase(1.0));
    set(&mut v, 0, -1, -sc * phase(-1.0));
    set(&mut v, -1, 0, -sc * phase(-1.0));
    set(&mut v, 1, 1, ss * phase(2.0));
    set(&mut v, -1, -1, ss * phase(-2.0));
    AngularCoupling { v }
}

/// One product state |a(j)> x |b(k)> of two dressed one-body states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairState {
    pub a: DressedIndex,
    pub b: DressedIndex,
    /// Magnetic quantum number of the atom-j block.
    pub m_a: i32,
    /// Magnetic quantum number of the atom-k block.
    pub m_b: i32,
}

impl PairState {
    pub fn total_m(&self) -> i32 {
        self.m_a + self.m_b
    }
}

/// Selection windows for the complement subspace Q.
#[derive(Debug, Clone, Copy)]
pub struct PairSelection {
    /// Energy window |E_q - mean(E_P)| <= delta_e_cut_hz, in h*Hz.
    pub delta_e_cut_hz: f64,
    /// Allowed total-m deviation beyond the range spanned by P.
    pub total_m_window: i32,
}

impl Default for PairSelection {
    fn default() -> Self {
        Self {
            // One dipole-dipole application changes total m by at most 2,
            // which is all that enters the second-order reduction.
            delta_e_cut_hz: DEFAULT_DELTA_E_CUT_GHZ * 1.0e9,
            total_m_window: 2,
        }
    }
}

/// Position of the spin pair states in `PairBasis` ordering (atom j first).
pub const P_UP_UP: usize = 0;
pub const P_UP_DOWN: usize = 1;
pub const P_DOWN_UP: usize = 2;
pub const P_DOWN_DOWN: usize = 3;

/// Two-atom basis split into the spin subspace P (4 states, first) and the
/// complement Q, with unperturbed energies.
#[derive(Debug, Clone)]
pub struct PairBasis {
    /// Spin subspace, ordered {up up, up down, down up, down down}.
    pub p_states: [PairState; 4],
    /// Complement, sorted by (energy, indices); disjoint from P.
    pub q_states: Vec<PairState>,
    /// Unperturbed energies for P then Q, h*Hz (sum of one-body energies).
    pub energies: DVector<f64>,
    pub selection: PairSelection,
}

impl PairBasis {
    pub fn len(&self) -> usize {
        4 + self.q_states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self, i: usize) -> &PairState {
        if i < 4 {
            &self.p_states[i]
        } else {
            &self.q_states[i - 4]
        }
    }

    pub fn mean_p_energy(&self) -> f64 {
        (self.energies[0] + self.energies[1] + self.energies[2] + self.energies[3]) / 4.0
    }
}

/// Dressed registries, dipole sets, and labeled spin levels for one atom pair
/// at fixed fields. Geometry-independent: reusable across an angular scan.
#[derive(Debug, Clone)]
pub struct PairAtoms {
    pub species_j: SpinSpecies,
    pub species_k: SpinSpecies,
    pub reg_j: AtomRegistry,
    pub reg_k: AtomRegistry,
    pub dip_j: DressedDipoleSet,
    pub dip_k: DressedDipoleSet,
    pub up_j: DressedIndex,
    pub down_j: DressedIndex,
    pub up_k: DressedIndex,
    pub down_k: DressedIndex,
}

/// Extra one-body principal-quantum-number padding around the spin levels.
pub const DEFAULT_N_PAD: u32 = 5;

/// Extra one-body m padding beyond the +-1 dipole stencil around the spin
/// levels. The total-m window still filters pair states, but a wider
/// per-atom span admits compensated combinations (one atom up, the other
/// down) that enrich the complement subspace.
pub const DEFAULT_M_PAD: i32 = 5;

/// Default complement energy window, in GHz about the mean spin-pair energy.
/// The four spin pair states themselves sit roughly +-40 GHz from that mean,
/// so the window must extend well past them: the intermediates that dominate
/// the diagonal second-order shifts (both atoms stepping n in opposite
/// directions) sit at comparable offsets, and a window that clips one side
/// biases the shifts asymmetrically. Coefficients are converged to better
/// than 0.2% against a doubled window at this value.
pub const DEFAULT_DELTA_E_CUT_GHZ: f64 = 140.0;

fn padded_m_values(sp: &SpinSpecies, n_pad: u32, m_pad: i32) -> Vec<i32> {
    let (_, n_max) = sp.n_window(n_pad);
    let mut out: Vec<i32> = Vec::new();
    for label in [&sp.up, &sp.down] {
        if let Some(state) = label.bare_state() {
            for dm in -(1 + m_pad)..=(1 + m_pad) {
                let m = state.m + dm;
                // drop m blocks with no level below the n ceiling (l <= n-1)
                if m.unsigned_abs() <= n_max - 1 {
                    out.push(m);
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Build dressed one-body data for both atoms of a pair.
pub fn prepare_pair_atoms(
    species_j: &SpinSpecies,
    species_k: &SpinSpecies,
    fields: &FieldConfig,
    n_pad: u32,
    m_pad: i32,
    defects: &QuantumDefectTable,
    cache: &RadialCache,
) -> Result<PairAtoms> {
    let build = |sp: &SpinSpecies| -> Result<(AtomRegistry, DressedDipoleSet, DressedIndex, DressedIndex)> {
        let (n_min, n_max) = sp.n_window(n_pad);
        let m_values = padded_m_values(sp, n_pad, m_pad);
        let reg = AtomRegistry::build(&m_values, n_min, n_max, fields, defects, cache)?;
        let dip = dressed_dipole_matrices(&reg, cache)?;
        let (up, _) = reg.labeled_state(sp.up, cache)?;
        let (down, _) = reg.labeled_state(sp.down, cache)?;
        Ok((reg, dip, up, down))
    };
    let (reg_j, dip_j, up_j, down_j) = build(species_j)?;
    let (reg_k, dip_k, up_k, down_k) = if species_k == species_j {
        (reg_j.clone(), dip_j.clone(), up_j, down_j)
    } else {
        build(species_k)?
    };
    Ok(PairAtoms {
        species_j: species_j.clone(),
        species_k: species_k.clone(),
        reg_j,
        reg_k,
        dip_j,
        dip_k,
        up_j,
        down_j,
        up_k,
        down_k,
    })
}

fn pair_state(atoms: &PairAtoms, a: DressedIndex, b: DressedIndex) -> PairState {
    PairState {
        a,
        b,
        m_a: atoms.reg_j.blocks[a.block].m(),
        m_b: atoms.reg_k.blocks[b.block].m(),
    }
}

/// Select the pair basis: P is the four spin pair states, Q is every other
/// product state inside the energy and total-m windows.
pub fn select_pair_basis(atoms: &PairAtoms, selection: PairSelection) -> Result<PairBasis> {
    let p_states = [
        pair_state(atoms, atoms.up_j, atoms.up_k),
        pair_state(atoms, atoms.up_j, atoms.down_k),
        pair_state(atoms, atoms.down_j, atoms.up_k),
        pair_state(atoms, atoms.down_j, atoms.down_k),
    ];
    let energy =
        |s: &PairState| atoms.reg_j.energy(s.a) + atoms.reg_k.energy(s.b);
    let p_energies: Vec<f64> = p_states.iter().map(energy).collect();
    let mean_p = p_energies.iter().sum::<f64>() / 4.0;
    let m_lo = p_states.iter().map(PairState::total_m).min().unwrap() - selection.total_m_window;
    let m_hi = p_states.iter().map(PairState::total_m).max().unwrap() + selection.total_m_window;

    let mut q: Vec<(f64, PairState)> = Vec::new();
    for (ib_j, blk_j) in atoms.reg_j.blocks.iter().enumerate() {
        for ib_k in 0..atoms.reg_k.blocks.len() {
            let total_m = blk_j.m() + atoms.reg_k.blocks[ib_k].m();
            if total_m < m_lo || total_m > m_hi {
                continue;
            }
            for sa in 0..blk_j.basis.len() {
                let a = DressedIndex { block: ib_j, state: sa };
                let e_a = atoms.reg_j.energy(a);
                for sb in 0..atoms.reg_k.blocks[ib_k].basis.len() {
                    let b = DressedIndex { block: ib_k, state: sb };
                    let s = pair_state(atoms, a, b);
                    if p_states.contains(&s) {
                        continue;
                    }
                    let e = e_a + atoms.reg_k.energy(b);
                    if (e - mean_p).abs() <= selection.delta_e_cut_hz {
                        q.push((e, s));
                    }
                }
            }
        }
    }
    if q.is_empty() {
        return Err(RydError::EmptyQSubspace);
    }
    q.sort_by(|(e1, s1), (e2, s2)| {
        e1.total_cmp(e2).then_with(|| {
            (s1.a.block, s1.a.state, s1.b.block, s1.b.state).cmp(&(
                s2.a.block,
                s2.a.state,
                s2.b.block,
                s2.b.state,
            ))
        })
    });
    let mut energies = DVector::zeros(4 + q.len());
    for (i, e) in p_energies.iter().enumerate() {
        energies[i] = *e;
    }
    for (i, (e, _)) in q.iter().enumerate() {
        energies[4 + i] = *e;
    }
    Ok(PairBasis {
        p_states,
        q_states: q.into_iter().map(|(_, s)| s).collect(),
        energies,
        selection,
    })
}

fn dressed_element(
    dip: &DressedDipoleSet,
    q: i32,
    bra: (usize, i32),
    ket: (usize, i32),
    m_bra: i32,
    m_ket: i32,
) -> f64 {
    // bra/ket: (eigenstate index, block m); element <bra| d_q |ket>
    if m_bra != m_ket + q {
        return 0.0;
    }
    match dip.get(q, m_ket) {
        Ok(mat) => mat[(bra.0, ket.0)],
        Err(_) => 0.0,
    }
    .to_owned()
}

/// One matrix element <bra| V |ket> of the dipole-dipole operator, h*Hz.
pub fn pair_interaction_element(
    bra: &PairState,
    ket: &PairState,
    dip_j: &DressedDipoleSet,
    dip_k: &DressedDipoleSet,
    v: &AngularCoupling,
) -> Complex64 {
    let dm_a = bra.m_a - ket.m_a;
    let dm_b = bra.m_b - ket.m_b;
    if dm_a.abs() > 1 || dm_b.abs() > 1 {
        return Complex64::new(0.0, 0.0);
    }
    let d1 = dressed_element(
        dip_j,
        dm_a,
        (bra.a.state, bra.m_a),
        (ket.a.state, ket.m_a),
        bra.m_a,
        ket.m_a,
    );
    if d1 == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let d2 = dressed_element(
        dip_k,
        dm_b,
        (bra.b.state, bra.m_b),
        (ket.b.state, ket.m_b),
        bra.m_b,
        ket.m_b,
    );
    v.get(dm_a, dm_b) * (d1 * d2)
}

/// One stored entry of the sparse pair Hamiltonian (upper triangle).
#[derive(Debug, Clone, Copy)]
pub struct MatrixEntry {
    pub row: usize,
    pub col: usize,
    pub value: Complex64,
    /// True when the entry carries a first-order dipolar contribution.
    pub dipolar: bool,
}

/// Sparse Hermitian pair Hamiltonian over P then Q, h*Hz. Only the upper
/// triangle (row <= col) is stored; the lower follows by conjugation.
#[derive(Debug, Clone)]
pub struct PairHamiltonianMatrix {
    pub dim: usize,
    pub entries: Vec<MatrixEntry>,
    pub drop_tolerance_hz: f64,
}

impl PairHamiltonianMatrix {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Dense complex reconstruction (small bases only).
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for e in &self.entries {
            h[(e.row, e.col)] = e.value;
            if e.row != e.col {
                h[(e.col, e.row)] = e.value.conj();
            }
        }
        h
    }

    /// Dense real reconstruction; fails if any entry has an imaginary part.
    pub fn to_dense_real(&self) -> Result<DMatrix<f64>> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for e in &self.entries {
            if e.value.im.abs() > 1e-12 * (1.0 + e.value.re.abs()) {
                return Err(RydError::Config(
                    "pair Hamiltonian is complex (phi != 0); use the complex path".into(),
                ));
            }
            h[(e.row, e.col)] = e.value.re;
            if e.row != e.col {
                h[(e.col, e.row)] = e.value.re;
            }
        }
        Ok(h)
    }

    /// Coordinate-format text dump: `row col real imag` per stored entry.
    pub fn coordinate_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# pair hamiltonian, upper triangle, h*Hz\n");
        out.push_str(
            "# basis ordering: indices 0..3 are the spin states {up up, up down, down up, down down} (atom j first),\n",
        );
        out.push_str("# followed by complement states sorted by unperturbed energy\n");
        let _ = writeln!(out, "# dim {} nnz {}", self.dim, self.nnz());
        out.push_str("row col real imag\n");
        for e in &self.entries {
            let _ = writeln!(out, "{} {} {:.12e} {:.12e}", e.row, e.col, e.value.re, e.value.im);
        }
        out
    }
}

/// Assemble the sparse pair Hamiltonian H2 = diag(E) + V over the basis.
/// Off-diagonal elements below the drop tolerance are discarded.
pub fn assemble_pair_hamiltonian(
    basis: &PairBasis,
    atoms: &PairAtoms,
    v: &AngularCoupling,
    drop_tolerance_hz: f64,
) -> Result<PairHamiltonianMatrix> {
    let n = basis.len();
    let mut entries = Vec::new();
    for row in 0..n {
        let bra = basis.state(row);
        for col in row..n {
            let ket = basis.state(col);
            let vel = pair_interaction_element(bra, ket, &atoms.dip_j, &atoms.dip_k, v);
            if row == col {
                let dipolar = vel.norm() > drop_tolerance_hz;
                entries.push(MatrixEntry {
                    row,
                    col,
                    value: vel + basis.energies[row],
                    dipolar,
                });
            } else if vel.norm() > drop_tolerance_hz {
                entries.push(MatrixEntry {
                    row,
                    col,
                    value: vel,
                    dipolar: true,
                });
            }
        }
    }
    Ok(PairHamiltonianMatrix {
        dim: n,
        entries,
        drop_tolerance_hz,
    })
}

/// Geometry-independent matvec workspace for one pair basis: compressed
/// one-atom dipole matrices over the dressed states that actually occur,
/// plus the scatter map from basis indices into the product grid.
#[derive(Debug, Clone)]
pub struct PairProblem {
    n_basis: usize,
    na: usize,
    nb: usize,
    /// basis index -> (compressed a index, compressed b index)
    scatter: Vec<(usize, usize)>,
    /// d1[q+1]: atom-j dipole component on compressed a states.
    d1: [DMatrix<f64>; 3],
    /// d2t[q+1]: transpose of the atom-k dipole component on compressed b states.
    d2t: [DMatrix<f64>; 3],
    /// Unperturbed energies relative to mean(E_P), per basis index.
    energies: DVector<f64>,
    /// Energy origin subtracted from the diagonal (mean of the P energies).
    pub e0: f64,
}

fn compress_dipoles(
    reg: &AtomRegistry,
    dip: &DressedDipoleSet,
    used: &[DressedIndex],
) -> [DMatrix<f64>; 3] {
    let n = used.len();
    let mut out = [
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
    ];
    for q in -1i32..=1 {
        let mat = &mut out[(q + 1) as usize];
        for (c, &ket) in used.iter().enumerate() {
            let m_ket = reg.blocks[ket.block].m();
            let Ok(full) = dip.get(q, m_ket) else { continue };
            for (r, &bra) in used.iter().enumerate() {
                if reg.blocks[bra.block].m() == m_ket + q {
                    mat[(r, c)] = full[(bra.state, ket.state)];
                }
            }
        }
    }
    out
}

impl PairProblem {
    pub fn new(basis: &PairBasis, atoms: &PairAtoms) -> Result<Self> {
        let n = basis.len();
        // Collect the distinct one-atom states in deterministic order.
        let mut a_map: HashMap<DressedIndex, usize> = HashMap::new();
        let mut b_map: HashMap<DressedIndex, usize> = HashMap::new();
        let mut a_used: Vec<DressedIndex> = Vec::new();
        let mut b_used: Vec<DressedIndex> = Vec::new();
        let mut scatter = Vec::with_capacity(n);
        for i in 0..n {
            let s = basis.state(i);
            let ia = *a_map.entry(s.a).or_insert_with(|| {
                a_used.push(s.a);
                a_used.len() - 1
            });
            let ib = *b_map.entry(s.b).or_insert_with(|| {
                b_used.push(s.b);
                b_used.len() - 1
            });
            scatter.push((ia, ib));
        }
        let d1 = compress_dipoles(&atoms.reg_j, &atoms.dip_j, &a_used);
        let d2 = compress_dipoles(&atoms.reg_k, &atoms.dip_k, &b_used);
        let d2t = [d2[0].transpose(), d2[1].transpose(), d2[2].transpose()];
        let e0 = basis.mean_p_energy();
        let energies = basis.energies.map(|e| e - e0);
        Ok(Self {
            n_basis: n,
            na: a_used.len(),
            nb: b_used.len(),
            scatter,
            d1,
            d2t,
            energies,
            e0,
        })
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    /// Unperturbed energies relative to the spin-subspace mean, h*Hz.
    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    /// Bind the angular coupling of one geometry, producing a matvec operator.
    pub fn operator<'a>(&'a self, v: &AngularCoupling) -> PairOperator<'a> {
        // M_{q'} = sum_q v_{q';q} d2_q^T, split into real and imaginary parts.
        let zero = DMatrix::zeros(self.nb, self.nb);
        let mut m_re = [zero.clone(), zero.clone(), zero.clone()];
        let mut m_im = [zero.clone(), zero.clone(), zero];
        for qp in -1i32..=1 {
            for q in -1i32..=1 {
                let z = v.get(qp, q);
                if z.re != 0.0 {
                    m_re[(qp + 1) as usize] += &self.d2t[(q + 1) as usize] * z.re;
                }
                if z.im != 0.0 {
                    m_im[(qp + 1) as usize] += &self.d2t[(q + 1) as usize] * z.im;
                }
            }
        }
        let complex = !v.is_real();
        PairOperator {
            prob: self,
            m_re,
            m_im,
            complex,
            v: *v,
        }
    }
}

/// Matrix-free pair Hamiltonian H2 - mean(E_P) for one geometry.
///
/// For phi = 0 the operator is real symmetric of dimension N. Otherwise it
/// is Hermitian and exposed as the doubled real-symmetric form
/// [[Re H, -Im H], [Im H, Re H]] of dimension 2N; eigenvalues come in
/// degenerate pairs and real/imaginary vector halves combine into the
/// complex eigenvector.
pub struct PairOperator<'a> {
    prob: &'a PairProblem,
    m_re: [DMatrix<f64>; 3],
    m_im: [DMatrix<f64>; 3],
    complex: bool,
    v: AngularCoupling,
}

impl<'a> PairOperator<'a> {
    pub fn is_complex(&self) -> bool {
        self.complex
    }

    pub fn n_basis(&self) -> usize {
        self.prob.n_basis
    }

    pub fn coupling(&self) -> &AngularCoupling {
        &self.v
    }

    /// Davidson target coordinate sets for the four spin states.
    pub fn target_sets(&self) -> Vec<Vec<usize>> {
        let n = self.prob.n_basis;
        (0..4)
            .map(|p| {
                if self.complex {
                    vec![p, n + p]
                } else {
                    vec![p]
                }
            })
            .collect()
    }

    fn apply_v_masked(&self, x: &DVector<f64>, m: &[DMatrix<f64>; 3]) -> DVector<f64> {
        let p = self.prob;
        let mut grid = DMatrix::zeros(p.na, p.nb);
        for (i, &(ia, ib)) in p.scatter.iter().enumerate() {
            grid[(ia, ib)] += x[i];
        }
        let mut out = DMatrix::zeros(p.na, p.nb);
        for q in 0..3 {
            if m[q].amax() == 0.0 {
                continue;
            }
            out += &p.d1[q] * (&grid * &m[q]);
        }
        let mut y = DVector::zeros(p.n_basis);
        for (i, &(ia, ib)) in p.scatter.iter().enumerate() {
            y[i] = out[(ia, ib)];
        }
        y
    }

    /// y = (V x) over the plain basis (no one-body diagonal), real path.
    pub fn apply_interaction(&self, x: &DVector<f64>) -> DVector<f64> {
        self.apply_v_masked(x, &self.m_re)
    }

    /// Column i of the interaction V over the plain basis: y[j] = <j|V|i>.
    /// Exploits the single-product structure of a basis state, so the cost
    /// is O(N) per dipole component instead of a full matvec.
    pub fn interaction_column(&self, i: usize) -> Vec<Complex64> {
        let p = self.prob;
        let (ia, ib) = p.scatter[i];
        let mut y = vec![Complex64::new(0.0, 0.0); p.n_basis];
        for q in 0..3 {
            let col = p.d1[q].column(ia);
            let row_re = self.m_re[q].row(ib);
            let row_im = self.m_im[q].row(ib);
            for (j, &(ja, jb)) in p.scatter.iter().enumerate() {
                let d = col[ja];
                if d != 0.0 {
                    y[j] += Complex64::new(d * row_re[jb], d * row_im[jb]);
                }
            }
        }
        y
    }

    /// Complex matrix-vector product y = (H2 - e0) x over the plain basis.
    pub fn apply_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.prob.n_basis;
        let xr = DVector::from_iterator(n, x.iter().map(|z| z.re));
        let xi = DVector::from_iterator(n, x.iter().map(|z| z.im));
        let yr = self.apply_v_masked(&xr, &self.m_re) - self.apply_v_masked(&xi, &self.m_im);
        let yi = self.apply_v_masked(&xr, &self.m_im) + self.apply_v_masked(&xi, &self.m_re);
        (0..n)
            .map(|i| {
                Complex64::new(
                    yr[i] + self.prob.energies[i] * x[i].re,
                    yi[i] + self.prob.energies[i] * x[i].im,
                )
            })
            .collect()
    }
}

impl<'a> SymOp for PairOperator<'a> {
    fn dim(&self) -> usize {
        if self.complex {
            2 * self.prob.n_basis
        } else {
            self.prob.n_basis
        }
    }

    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        let n = self.prob.n_basis;
        if !self.complex {
            let mut out = self.apply_v_masked(x, &self.m_re);
            for i in 0..n {
                out[i] += self.prob.energies[i] * x[i];
            }
            y.copy_from(&out);
            return;
        }
        let xr = x.rows(0, n).into_owned();
        let xi = x.rows(n, n).into_owned();
        // [[A, -B], [B, A]] with A = diag(E) + Re V, B = Im V
        let mut yr = self.apply_v_masked(&xr, &self.m_re) - self.apply_v_masked(&xi, &self.m_im);
        let mut yi = self.apply_v_masked(&xr, &self.m_im) + self.apply_v_masked(&xi, &self.m_re);
        for i in 0..n {
            yr[i] += self.prob.energies[i] * xr[i];
            yi[i] += self.prob.energies[i] * xi[i];
        }
        y.rows_mut(0, n).copy_from(&yr);
        y.rows_mut(n, n).copy_from(&yi);
    }

    fn diagonal(&self) -> DVector<f64> {
        let p = self.prob;
        let v00 = self.v.get(0, 0).re;
        let mut d = DVector::zeros(self.dim());
        for (i, &(ia, ib)) in p.scatter.iter().enumerate() {
            let vd = v00 * p.d1[1][(ia, ia)] * p.d2t[1][(ib, ib)];
            d[i] = p.energies[i] + vd;
            if self.complex {
                d[p.n_basis + i] = d[i];
            }
        }
        d
    }
}
