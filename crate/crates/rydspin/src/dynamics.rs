//! Exact time evolution of small spin arrays and observable measurement,
//! including the hardcore-boson occupation view n_i = 1/2 - <S_z^i>.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, RydError};

/// A normalized state over the 2^N product basis (site 0 least significant
/// bit, set bit = spin up).
#[derive(Debug, Clone)]
pub struct SpinStateVector {
    pub amplitudes: DVector<Complex64>,
    pub n_sites: usize,
}

impl SpinStateVector {
    /// The product state with the given set of up sites.
    pub fn product(n_sites: usize, up_sites: &[usize]) -> Result<Self> {
        let dim = 1usize << n_sites;
        let mut index = 0usize;
        for &s in up_sites {
            if s >= n_sites {
                return Err(RydError::DimensionMismatch {
                    details: format!("site {s} out of range for {n_sites} sites"),
                });
            }
            index |= 1 << s;
        }
        let mut amplitudes = DVector::zeros(dim);
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amplitudes,
            n_sites,
        })
    }

    pub fn from_amplitudes(n_sites: usize, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1usize << n_sites {
            return Err(RydError::DimensionMismatch {
                details: format!(
                    "{} amplitudes for {} sites",
                    amplitudes.len(),
                    n_sites
                ),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(RydError::Config(format!(
                "state norm {norm} deviates from 1"
            )));
        }
        Ok(Self {
            amplitudes,
            n_sites,
        })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// <S_z^j> for one site.
    pub fn expect_sz(&self, site: usize) -> f64 {
        let bit = 1usize << site;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(b, a)| {
                let s = if b & bit != 0 { 0.5 } else { -0.5 };
                s * a.norm_sqr()
            })
            .sum()
    }

    /// <S_z^i S_z^j> two-point correlator.
    pub fn expect_szsz(&self, i: usize, j: usize) -> f64 {
        let bi = 1usize << i;
        let bj = 1usize << j;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(b, a)| {
                let si = if b & bi != 0 { 0.5 } else { -0.5 };
                let sj = if b & bj != 0 { 0.5 } else { -0.5 };
                si * sj * a.norm_sqr()
            })
            .sum()
    }
}

/// Eigendecomposition-based propagator for a Hermitian Hamiltonian in h*Hz:
/// |psi(t)> = exp(-2*pi*i*H*t)|psi(0)> with t in seconds.
#[derive(Debug, Clone)]
pub struct Propagator {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<Complex64>,
}

impl Propagator {
    pub fn new(h: &DMatrix<Complex64>) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n {
            return Err(RydError::DimensionMismatch {
                details: format!("{}x{} Hamiltonian", h.nrows(), h.ncols()),
            });
        }
        let asym = (h - h.adjoint()).camax();
        let scale = h.camax().max(1.0);
        if asym > 1e-9 * scale {
            return Err(RydError::NotHermitian { asym });
        }
        let eig = h.clone().symmetric_eigen();
        Ok(Self {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    /// Apply the evolution operator for time `t_s` (seconds).
    pub fn at(&self, state: &SpinStateVector, t_s: f64) -> Result<SpinStateVector> {
        if state.amplitudes.len() != self.eigenvalues.len() {
            return Err(RydError::DimensionMismatch {
                details: format!(
                    "state dim {} vs propagator dim {}",
                    state.amplitudes.len(),
                    self.eigenvalues.len()
                ),
            });
        }
        // coefficients in the eigenbasis
        let coeffs = self.eigenvectors.adjoint() * &state.amplitudes;
        let phased = DVector::from_iterator(
            coeffs.len(),
            coeffs.iter().enumerate().map(|(i, c)| {
                let phase = -2.0 * std::f64::consts::PI * self.eigenvalues[i] * t_s;
                c * Complex64::from_polar(1.0, phase)
            }),
        );
        let amplitudes = &self.eigenvectors * phased;
        Ok(SpinStateVector {
            amplitudes,
            n_sites: state.n_sites,
        })
    }

    /// Energy expectation <psi|H|psi>, h*Hz.
    pub fn energy(&self, state: &SpinStateVector) -> f64 {
        let coeffs = self.eigenvectors.adjoint() * &state.amplitudes;
        coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| self.eigenvalues[i] * c.norm_sqr())
            .sum()
    }
}

/// Evolve an initial state over a time grid (seconds). Every returned
/// state is normalized to 1e-9.
pub fn evolve(
    state: &SpinStateVector,
    h: &DMatrix<Complex64>,
    t_grid: &[f64],
) -> Result<Vec<SpinStateVector>> {
    let prop = Propagator::new(h)?;
    let e0 = prop.energy(state);
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let st = prop.at(state, t)?;
        let norm = st.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(RydError::EigenNotConverged {
                details: format!("propagation lost unitarity: norm {norm}"),
            });
        }
        let e = prop.energy(&st);
        if (e - e0).abs() > 1e-8 * e0.abs().max(1.0) {
            return Err(RydError::EigenNotConverged {
                details: format!("energy drift {} -> {}", e0, e),
            });
        }
        out.push(st);
    }
    Ok(out)
}

/// Time series of per-site observables.
#[derive(Debug, Clone)]
pub struct ObservableSeries {
    /// Sample times, seconds.
    pub times: Vec<f64>,
    /// sz[t][site] = <S_z^site>(t).
    pub sz: Vec<Vec<f64>>,
    /// correlators[t][pair index] aligned with `correlator_pairs`.
    pub correlators: Vec<Vec<f64>>,
    pub correlator_pairs: Vec<(usize, usize)>,
    /// Total magnetization sum_j <S_z^j> per time.
    pub magnetization: Vec<f64>,
}

/// Measure per-site <S_z>, selected two-point correlators, and the total
/// magnetization along a trajectory.
pub fn measure(
    times: &[f64],
    states: &[SpinStateVector],
    correlator_pairs: &[(usize, usize)],
) -> Result<ObservableSeries> {
    if times.len() != states.len() {
        return Err(RydError::DimensionMismatch {
            details: format!("{} times vs {} states", times.len(), states.len()),
        });
    }
    let mut sz = Vec::with_capacity(states.len());
    let mut correlators = Vec::with_capacity(states.len());
    let mut magnetization = Vec::with_capacity(states.len());
    for st in states {
        let row: Vec<f64> = (0..st.n_sites).map(|j| st.expect_sz(j)).collect();
        magnetization.push(row.iter().sum());
        correlators.push(
            correlator_pairs
                .iter()
                .map(|&(i, j)| st.expect_szsz(i, j))
                .collect(),
        );
        sz.push(row);
    }
    Ok(ObservableSeries {
        times: times.to_vec(),
        sz,
        correlators,
        correlator_pairs: correlator_pairs.to_vec(),
        magnetization,
    })
}

impl ObservableSeries {
    /// Hardcore-boson view: occupation n_i(t) = 1/2 - <S_z^i>(t).
    pub fn boson_occupations(&self) -> Vec<Vec<f64>> {
        self.sz
            .iter()
            .map(|row| row.iter().map(|s| 0.5 - s).collect())
            .collect()
    }

    /// Total boson number per time step.
    pub fn boson_totals(&self) -> Vec<f64> {
        self.boson_occupations()
            .iter()
            .map(|row| row.iter().sum())
            .collect()
    }

    /// Long-format CSV: one row per (time, site) with spin and boson views.
    pub fn to_csv(&self, version_comment: &str) -> String {
        let mut out = String::new();
        out.push_str(version_comment);
        if !version_comment.ends_with('\n') {
            out.push('\n');
        }
        out.push_str("t_s,site,Sz,n_boson\n");
        for (ti, &t) in self.times.iter().enumerate() {
            for (site, &s) in self.sz[ti].iter().enumerate() {
                out.push_str(&format!("{t:.12e},{site},{s:.12e},{:.12e}\n", 0.5 - s));
            }
        }
        out
    }

    /// Correlator CSV: one row per (time, pair).
    pub fn correlators_csv(&self, version_comment: &str) -> String {
        let mut out = String::new();
        out.push_str(version_comment);
        if !version_comment.ends_with('\n') {
            out.push('\n');
        }
        out.push_str("t_s,site_i,site_j,SzSz\n");
        for (ti, &t) in self.times.iter().enumerate() {
            for (pi, &(i, j)) in self.correlator_pairs.iter().enumerate() {
                out.push_str(&format!(
                    "{t:.12e},{i},{j},{:.12e}\n",
                    self.correlators[ti][pi]
                ));
            }
        }
        out
    }
}
