//! Radial matrix elements <n1 l1 | r^p | n2 l2> for Rydberg-Ritz states,
//! by Numerov integration of the radial equation on a logarithmic grid.
//!
//! With x = ln r and u(r) = r R(r) = e^(x/2) w(x), the radial equation
//! becomes w'' = [(l + 1/2)^2 - 2 r + r^2 / nu^2] w with r = e^x, which is
//! integrated inward from the classically forbidden outer region.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::RwLock;

use crate::error::{Result, RydError};

/// Quantum defects delta_l; energies are -Ry/(n - delta_l)^2. Defaults to
/// zero (pure hydrogenic), which is adequate for the high-l states used here;
/// low-l defects can be supplied for completeness.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuantumDefectTable {
    delta_by_l: Vec<(u32, f64)>,
}

impl QuantumDefectTable {
    pub fn hydrogenic() -> Self {
        Self::default()
    }

    /// Defect table from explicit (l, delta) pairs. Values for l >= 4 are
    /// accepted but should normally stay zero.
    pub fn from_pairs(pairs: &[(u32, f64)]) -> Self {
        let mut delta_by_l = pairs.to_vec();
        delta_by_l.sort_by_key(|&(l, _)| l);
        Self { delta_by_l }
    }

    pub fn delta(&self, l: u32) -> f64 {
        self.delta_by_l
            .iter()
            .find(|&&(dl, _)| dl == l)
            .map(|&(_, d)| d)
            .unwrap_or(0.0)
    }
}

/// Effective quantum number nu = n - delta_l, validated.
pub fn effective_n(n: u32, l: u32, defects: &QuantumDefectTable) -> Result<f64> {
    let delta = defects.delta(l);
    if delta >= n as f64 {
        return Err(RydError::UnphysicalDefect { n, delta });
    }
    Ok(n as f64 - delta)
}

struct LogGrid {
    x_min: f64,
    dx: f64,
    len: usize,
}

impl LogGrid {
    fn r(&self, i: usize) -> f64 {
        (self.x_min + i as f64 * self.dx).exp()
    }
}

/// Numerov step count heuristic: ~12 points per local de Broglie wavelength
/// at the fastest oscillation, capped so low-n states stay well resolved.
fn choose_dx(nu: f64, l: u32) -> f64 {
    let l2 = (l as f64 + 0.5).powi(2);
    let k_max = (nu * nu - l2).max(25.0).sqrt();
    (2.0 * std::f64::consts::PI / (12.0 * k_max)).min(5.0e-3)
}

fn inner_cut(nu: f64, l: u32) -> f64 {
    let l2 = (l as f64) * (l as f64 + 1.0);
    if l2 >= nu * nu {
        return 1.0e-4;
    }
    let r_turn = nu * nu * (1.0 - (1.0 - l2 / (nu * nu)).sqrt());
    (0.15 * r_turn).max(1.0e-4)
}

/// Integrate w'' = g w inward on the shared grid; returns w normalized so
/// that int u^2 dr = 1. NaN or a vanishing norm reports non-convergence.
fn numerov_inward(grid: &LogGrid, nu: f64, l: u32) -> Result<Vec<f64>> {
    let n = grid.len;
    if n < 16 {
        return Err(RydError::RadialNotConverged {
            details: format!("grid has only {n} points (dx={}, nu={nu}, l={l})", grid.dx),
        });
    }
    let l2 = (l as f64 + 0.5).powi(2);
    let g = |i: usize| -> f64 {
        let r = grid.r(i);
        l2 - 2.0 * r + r * r / (nu * nu)
    };
    let h2 = grid.dx * grid.dx;
    let mut w = vec![0.0; n];
    w[n - 1] = 1.0e-15;
    // WKB-seeded second point (solution grows inward out of the tail)
    let k_tail = g(n - 1).max(0.0).sqrt();
    w[n - 2] = w[n - 1] * (k_tail * grid.dx).exp().max(1.0 + 1e-9);
    for i in (0..n - 2).rev() {
        let c_prev = 1.0 - h2 / 12.0 * g(i + 2);
        let c_mid = 1.0 + 5.0 * h2 / 12.0 * g(i + 1);
        let c_next = 1.0 - h2 / 12.0 * g(i);
        w[i] = (2.0 * c_mid * w[i + 1] - c_prev * w[i + 2]) / c_next;
        if w[i].abs() > 1.0e100 {
            let s = 1.0e-100;
            for v in w[i..].iter_mut() {
                *v *= s;
            }
        }
    }
    // Suppress the irregular-solution contamination inside the inner
    // forbidden region: walking inward from the main lobe, zero the tail
    // once |w| starts growing again.
    // the physical lobe lives in the classically allowed region; the raw
    // global maximum may sit in the contaminated inner tail instead
    let weight = |i: usize| w[i].abs() * (grid.x_min + i as f64 * grid.dx).exp();
    let i_peak = (0..n)
        .filter(|&i| g(i) < 0.0)
        .max_by(|&a, &b| weight(a).total_cmp(&weight(b)))
        .unwrap_or_else(|| (0..n).max_by(|&a, &b| weight(a).total_cmp(&weight(b))).unwrap());
    let mut running_min = f64::MAX;
    let mut cut = 0usize;
    for i in (0..=i_peak).rev() {
        let a = w[i].abs();
        running_min = running_min.min(a.max(1e-300));
        if g(i) > 0.0 && a > 1.0e3 * running_min {
            cut = i + 1;
            break;
        }
    }
    for v in w[..cut].iter_mut() {
        *v = 0.0;
    }
    // normalize: int u^2 dr = int w^2 e^{2x} dx
    let norm2 = simpson(grid, |i| {
        let x = grid.x_min + i as f64 * grid.dx;
        w[i] * w[i] * (2.0 * x).exp()
    });
    if !norm2.is_finite() || norm2 <= 0.0 {
        return Err(RydError::RadialNotConverged {
            details: format!(
                "norm^2 = {norm2:.3e} on grid dx={}, {} points (nu={nu}, l={l})",
                grid.dx, n
            ),
        });
    }
    let s = 1.0 / norm2.sqrt();
    for v in w.iter_mut() {
        *v *= s;
    }
    Ok(w)
}

fn simpson(grid: &LogGrid, f: impl Fn(usize) -> f64) -> f64 {
    let n = grid.len;
    let mut acc = 0.0;
    let m = if n % 2 == 1 { n } else { n - 1 };
    for i in 0..m {
        let c = if i == 0 || i == m - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += c * f(i);
    }
    acc *= grid.dx / 3.0;
    if n % 2 == 0 {
        // trailing trapezoid panel in the exponentially dead tail
        acc += 0.5 * grid.dx * (f(n - 2) + f(n - 1));
    }
    acc
}

/// Radial matrix element <n1 l1 | r^power | n2 l2> in units of a0^power.
/// Both wavefunctions are solved on a shared logarithmic grid so the
/// quadrature is exact in the overlap region; symmetric in its arguments.
pub fn radial_matrix_element(
    n1: u32,
    l1: u32,
    n2: u32,
    l2: u32,
    power: i32,
    defects: &QuantumDefectTable,
) -> Result<f64> {
    let nu1 = effective_n(n1, l1, defects)?;
    let nu2 = effective_n(n2, l2, defects)?;
    if nu1 <= l1 as f64 || nu2 <= l2 as f64 {
        return Err(RydError::UnphysicalDefect {
            n: n1.min(n2),
            delta: defects.delta(l1).max(defects.delta(l2)),
        });
    }
    let r_max = |n: u32| 2.0 * n as f64 * (n as f64 + 15.0);
    let x_max = r_max(n1).max(r_max(n2)).ln();
    let x_min = inner_cut(nu1, l1).min(inner_cut(nu2, l2)).ln();
    let dx_raw = choose_dx(nu1, l1).min(choose_dx(nu2, l2));
    let len = ((x_max - x_min) / dx_raw).ceil() as usize + 1;
    let dx = (x_max - x_min) / (len - 1) as f64;
    let grid = LogGrid { x_min, dx, len };
    let w1 = numerov_inward(&grid, nu1, l1)?;
    let w2 = numerov_inward(&grid, nu2, l2)?;
    let p = power as f64;
    let value = simpson(&grid, |i| {
        let x = grid.x_min + i as f64 * grid.dx;
        w1[i] * w2[i] * ((2.0 + p) * x).exp()
    });
    if !value.is_finite() {
        return Err(RydError::RadialNotConverged {
            details: format!("integral not finite on grid dx={dx}, {len} points"),
        });
    }
    Ok(value)
}

/// Dipole radial integral <n1 l1 | r | n2 l2>; requires |l1 - l2| = 1.
pub fn radial_integral(
    n1: u32,
    l1: u32,
    n2: u32,
    l2: u32,
    defects: &QuantumDefectTable,
) -> Result<f64> {
    if (l1 as i64 - l2 as i64).abs() != 1 {
        return Err(RydError::BadRadialL { l1, l2 });
    }
    radial_matrix_element(n1, l1, n2, l2, 1, defects)
}

type CacheKey = (u32, u32, u32, u32, u64, u64, i32);

fn cache_key(n1: u32, l1: u32, n2: u32, l2: u32, d1: f64, d2: f64, power: i32) -> CacheKey {
    // canonical order: integrals are symmetric under swapping the states
    if (n1, l1, d1.to_bits()) <= (n2, l2, d2.to_bits()) {
        (n1, l1, n2, l2, d1.to_bits(), d2.to_bits(), power)
    } else {
        (n2, l2, n1, l1, d2.to_bits(), d1.to_bits(), power)
    }
}

pub const CACHE_HEADER: &str = "rydspin-radial-cache v1";

/// Shared cache of radial integrals: concurrent reads, exclusive insertion.
/// Dipole (r^1) entries can be persisted to a versioned text table.
#[derive(Debug, Default)]
pub struct RadialCache {
    map: RwLock<HashMap<CacheKey, f64>>,
}

impl RadialCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.write().unwrap().clear();
    }

    pub fn matrix_element(
        &self,
        n1: u32,
        l1: u32,
        n2: u32,
        l2: u32,
        power: i32,
        defects: &QuantumDefectTable,
    ) -> Result<f64> {
        let key = cache_key(n1, l1, n2, l2, defects.delta(l1), defects.delta(l2), power);
        if let Some(&v) = self.map.read().unwrap().get(&key) {
            return Ok(v);
        }
        let v = radial_matrix_element(n1, l1, n2, l2, power, defects)?;
        self.map.write().unwrap().insert(key, v);
        Ok(v)
    }

    pub fn dipole(
        &self,
        n1: u32,
        l1: u32,
        n2: u32,
        l2: u32,
        defects: &QuantumDefectTable,
    ) -> Result<f64> {
        if (l1 as i64 - l2 as i64).abs() != 1 {
            return Err(RydError::BadRadialL { l1, l2 });
        }
        self.matrix_element(n1, l1, n2, l2, 1, defects)
    }

    /// Serialize the dipole (r^1) entries as the versioned cache table.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(CacheKey, f64)> = self
            .map
            .read()
            .unwrap()
            .iter()
            .filter(|(k, _)| k.6 == 1)
            .map(|(k, v)| (*k, *v))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out = String::new();
        out.push_str(CACHE_HEADER);
        out.push('\n');
        for ((n1, l1, n2, l2, d1, d2, _), v) in rows {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {:.11e}",
                n1,
                l1,
                n2,
                l2,
                f64::from_bits(d1),
                f64::from_bits(d2),
                v
            );
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_table())?;
        Ok(())
    }

    /// Load a cache file; malformed rows are reported by line number.
    pub fn load(&self, path: &Path) -> Result<usize> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CACHE_HEADER => {}
            other => {
                return Err(RydError::Cache(format!(
                    "bad header line: {:?}, expected '{CACHE_HEADER}'",
                    other.map(|(_, h)| h)
                )))
            }
        }
        let mut loaded = 0;
        let mut map = self.map.write().unwrap();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed: Option<(u32, u32, u32, u32, f64, f64, f64)> = (|| {
                if fields.len() != 7 {
                    return None;
                }
                Some((
                    fields[0].parse().ok()?,
                    fields[1].parse().ok()?,
                    fields[2].parse().ok()?,
                    fields[3].parse().ok()?,
                    fields[4].parse().ok()?,
                    fields[5].parse().ok()?,
                    fields[6].parse().ok()?,
                ))
            })();
            let Some((n1, l1, n2, l2, d1, d2, v)) = parsed else {
                return Err(RydError::Cache(format!("malformed row at line {}", idx + 1)));
            };
            map.insert(cache_key(n1, l1, n2, l2, d1, d2, 1), v);
            loaded += 1;
        }
        Ok(loaded)
    }

    /// Recompute a sample of cached dipole rows (about `fraction` of them,
    /// at least one) and report rows that disagree beyond 1e-9 relative.
    pub fn verify(&self, fraction: f64) -> Result<Vec<(CacheKey, f64, f64)>> {
        let rows: Vec<(CacheKey, f64)> = {
            let m = self.map.read().unwrap();
            m.iter().filter(|(k, _)| k.6 == 1).map(|(k, v)| (*k, *v)).collect()
        };
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let step = (1.0 / fraction.clamp(1e-6, 1.0)).round().max(1.0) as usize;
        let mut bad = Vec::new();
        for (i, (key, cached)) in rows.iter().enumerate() {
            if i % step != 0 {
                continue;
            }
            let (n1, l1, n2, l2, d1, d2, _) = *key;
            let defects = QuantumDefectTable::from_pairs(&[
                (l1, f64::from_bits(d1)),
                (l2, f64::from_bits(d2)),
            ]);
            let fresh = radial_matrix_element(n1, l1, n2, l2, 1, &defects)?;
            let scale = fresh.abs().max(1e-30);
            if (fresh - cached).abs() / scale > 1e-9 {
                bad.push((*key, *cached, fresh));
            }
        }
        Ok(bad)
    }
}
