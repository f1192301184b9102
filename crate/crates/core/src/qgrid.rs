//! Wavefunctions on a uniform 2D grid and magnetic translation operators for a
//! uniform field `B` normal to the grid plane, in the symmetric gauge.
//!
//! With `A = B x r / 2` the passive generator is `G = p + (e/2c) B x r`, and
//! `a.p` commutes with `r.(a x B)`, so
//!
//! ```text
//! T_G(a) psi(r)  = exp(-i (e/2 hbar c) r.(a x B)) psi(r - a)
//! T_pi(a) psi(r) = exp(+i (e/2 hbar c) r.(a x B)) psi(r - a)
//! ```
//!
//! Shifts are restricted to lattice vectors, so both operators act by exact
//! sample shifts and phase multiplication. Boundaries are open: amplitudes
//! shifted off the grid are dropped, and the margin rule makes sure there are
//! none worth keeping.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::PhysicalConstants;

/// Amplitude ratio (band maximum over global peak) allowed in the margin band.
pub const MARGIN_TOLERANCE: f64 = 1e-12;

/// Below this fidelity two states are not treated as proportional.
pub const MIN_FIDELITY: f64 = 0.99;

#[derive(Debug, Error)]
pub enum GridError {
    #[error(
        "margin rule violated: band of width {width} cells holds {ratio:e} of the peak amplitude"
    )]
    MarginViolation { width: usize, ratio: f64 },
    #[error("shift ({m1}, {m2}) exceeds a quarter of the grid size {n}")]
    ShiftTooLarge { m1: i64, m2: i64, n: usize },
    #[error("packet support [{lo}, {hi}] leaves the usable region [{min}, {max}]")]
    SupportOutsideGrid {
        lo: f64,
        hi: f64,
        min: f64,
        max: f64,
    },
    #[error("invalid grid parameter: {0}")]
    InvalidParameter(String),
    #[error("grids differ")]
    GridMismatch,
    #[error("export failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("export failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub h: f64,
    /// Physical coordinates of sample `(0, 0)`.
    pub origin: [f64; 2],
}

impl GridSpec {
    pub fn new(n: usize, h: f64, origin: [f64; 2]) -> Result<Self, GridError> {
        if n < 8 {
            return Err(GridError::InvalidParameter(format!("grid size {n} < 8")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(GridError::InvalidParameter(format!("spacing {h}")));
        }
        Ok(GridSpec { n, h, origin })
    }

    /// Grid whose central sample sits at the physical origin.
    pub fn centered(n: usize, h: f64) -> Result<Self, GridError> {
        let o = -((n / 2) as f64) * h;
        Self::new(n, h, [o, o])
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    pub fn extent(&self) -> ([f64; 2], [f64; 2]) {
        let last = (self.n - 1) as f64 * self.h;
        (self.origin, [self.origin[0] + last, self.origin[1] + last])
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Integer lattice displacement `(m1, m2)`, physical shift `(m1 h, m2 h, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeShift {
    pub m1: i64,
    pub m2: i64,
}

impl LatticeShift {
    pub fn new(m1: i64, m2: i64) -> Self {
        LatticeShift { m1, m2 }
    }

    /// Nearest lattice shift to a physical vector, if it is lattice-aligned.
    pub fn from_physical(a: [f64; 2], h: f64) -> Option<Self> {
        let m = a.map(|v| v / h);
        let r = m.map(f64::round);
        ((m[0] - r[0]).abs() < 1e-9 && (m[1] - r[1]).abs() < 1e-9)
            .then(|| LatticeShift::new(r[0] as i64, r[1] as i64))
    }

    pub fn physical(&self, h: f64) -> [f64; 2] {
        [self.m1 as f64 * h, self.m2 as f64 * h]
    }

    pub fn plus(&self, o: &LatticeShift) -> LatticeShift {
        LatticeShift::new(self.m1 + o.m1, self.m2 + o.m2)
    }

    pub fn neg(&self) -> LatticeShift {
        LatticeShift::new(-self.m1, -self.m2)
    }

    fn cells(&self) -> usize {
        self.m1.unsigned_abs().max(self.m2.unsigned_abs()) as usize
    }

    fn check(&self, n: usize) -> Result<(), GridError> {
        let quarter = (n / 4) as u64;
        if self.m1.unsigned_abs() >= quarter || self.m2.unsigned_abs() >= quarter {
            return Err(GridError::ShiftTooLarge {
                m1: self.m1,
                m2: self.m2,
                n,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranslationKind {
    Passive,
    Active,
}

impl TranslationKind {
    fn phase_sign(self) -> f64 {
        match self {
            TranslationKind::Passive => -1.0,
            TranslationKind::Active => 1.0,
        }
    }
}

/// Complex amplitudes on an `n x n` grid, stored row-major in `x2`
/// (`index = j * n + i`, with `i` along `x1`).
#[derive(Clone, Debug)]
pub struct Wavefunction2D {
    grid: GridSpec,
    data: Vec<Complex64>,
    norm: f64,
}

impl Wavefunction2D {
    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.n {
            for i in 0..grid.n {
                data.push(f(grid.point(i, j)));
            }
        }
        Self::from_data(grid, data)
    }

    fn from_data(grid: GridSpec, data: Vec<Complex64>) -> Self {
        let norm = (data.iter().map(|c| c.norm_sqr()).sum::<f64>() * grid.h * grid.h).sqrt();
        Wavefunction2D { grid, data, norm }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[j * self.grid.n + i]
    }

    /// Discrete L2 norm with cell weight `h^2`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn inner(&self, other: &Wavefunction2D) -> Result<Complex64, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let s: Complex64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.h * self.grid.h)
    }

    /// `|<u, v>| / (|u| |v|)`, insensitive to global phase.
    pub fn fidelity(&self, other: &Wavefunction2D) -> Result<f64, GridError> {
        Ok(self.inner(other)?.norm() / (self.norm * other.norm))
    }

    pub fn sub(&self, other: &Wavefunction2D) -> Result<Wavefunction2D, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        Ok(Self::from_data(
            self.grid,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    /// Largest amplitude within `width` cells of the boundary, relative to the peak.
    pub fn margin_ratio(&self, width: usize) -> f64 {
        let n = self.grid.n;
        let peak = self.data.iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let mut band = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                if i < width || j < width || i + width >= n || j + width >= n {
                    band = band.max(self.at(i, j).norm());
                }
            }
        }
        band / peak
    }

    pub fn check_margin(&self, width: usize) -> Result<(), GridError> {
        let ratio = self.margin_ratio(width);
        if ratio >= MARGIN_TOLERANCE || !ratio.is_finite() {
            return Err(GridError::MarginViolation { width, ratio });
        }
        Ok(())
    }

    /// Discrete `<x1>, <x2>`.
    pub fn mean_position(&self) -> [f64; 2] {
        let n = self.grid.n;
        let mut acc = [0.0; 2];
        let mut total = 0.0;
        for j in 0..n {
            for i in 0..n {
                let w = self.at(i, j).norm_sqr();
                let r = self.grid.point(i, j);
                acc[0] += w * r[0];
                acc[1] += w * r[1];
                total += w;
            }
        }
        [acc[0] / total, acc[1] / total]
    }

    /// Canonical momentum `<-i hbar grad>` from the discrete Fourier transform.
    pub fn mean_momentum(&self, hbar: f64) -> [f64; 2] {
        let n = self.grid.n;
        let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
        let wavenumber = |f: usize| -> f64 {
            let signed = if f <= n / 2 {
                f as f64
            } else {
                f as f64 - n as f64
            };
            2.0 * PI * signed / (n as f64 * self.grid.h)
        };
        let mut out = [0.0; 2];
        for (axis, slot) in out.iter_mut().enumerate() {
            let (mut num, mut den) = (0.0, 0.0);
            for line in 0..n {
                let mut buf: Vec<Complex64> = (0..n)
                    .map(|s| {
                        if axis == 0 {
                            self.at(s, line)
                        } else {
                            self.at(line, s)
                        }
                    })
                    .collect();
                fft.process(&mut buf);
                for (f, c) in buf.iter().enumerate() {
                    let w = c.norm_sqr();
                    num += wavenumber(f) * w;
                    den += w;
                }
            }
            *slot = hbar * num / den;
        }
        out
    }

    /// CSV rows `i, j, re, im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GridError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "re", "im"])?;
        for j in 0..self.grid.n {
            for i in 0..self.grid.n {
                let c = self.at(i, j);
                w.write_record(&[
                    i.to_string(),
                    j.to_string(),
                    c.re.to_string(),
                    c.im.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// JSON header describing the grid: `{"n", "h", "origin"}`.
    pub fn header_json(&self) -> serde_json::Value {
        serde_json::json!({ "n": self.grid.n, "h": self.grid.h, "origin": self.grid.origin })
    }
}

/// Gaussian packet `exp(-|r - c|^2 / (4 sigma^2) + i k0.r)`, unit discrete norm.
pub fn gaussian_packet(
    grid: GridSpec,
    center: [f64; 2],
    sigma: f64,
    k0: [f64; 2],
    margin: f64,
) -> Result<Wavefunction2D, GridError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(GridError::InvalidParameter(format!("sigma {sigma}")));
    }
    let (lo, hi) = grid.extent();
    for a in 0..2 {
        let (s_lo, s_hi) = (center[a] - 6.0 * sigma, center[a] + 6.0 * sigma);
        let (min, max) = (lo[a] + margin, hi[a] - margin);
        if s_lo < min || s_hi > max {
            return Err(GridError::SupportOutsideGrid {
                lo: s_lo,
                hi: s_hi,
                min,
                max,
            });
        }
    }
    let psi = Wavefunction2D::from_fn(grid, |r| {
        let dx = r[0] - center[0];
        let dy = r[1] - center[1];
        let env = (-(dx * dx + dy * dy) / (4.0 * sigma * sigma)).exp();
        Complex64::from_polar(env, k0[0] * r[0] + k0[1] * r[1])
    });
    let norm = psi.norm;
    Ok(Wavefunction2D::from_data(
        grid,
        psi.data.iter().map(|c| c / norm).collect(),
    ))
}

fn coupling_over_hbar(consts: &PhysicalConstants) -> f64 {
    consts.e_f64() / (consts.hbar_f64() * consts.c_f64())
}

fn translate_unchecked(
    psi: &Wavefunction2D,
    a: LatticeShift,
    b: f64,
    consts: &PhysicalConstants,
    kind: TranslationKind,
) -> Wavefunction2D {
    let grid = psi.grid;
    let n = grid.n as i64;
    let [a1, a2] = a.physical(grid.h);
    // r.(a x B) for B along x3 is B (x1 a2 - x2 a1)
    let kappa = kind.phase_sign() * 0.5 * coupling_over_hbar(consts) * b;
    let mut data = vec![Complex64::new(0.0, 0.0); grid.len()];
    for j in 0..n {
        let sj = j - a.m2;
        if !(0..n).contains(&sj) {
            continue;
        }
        for i in 0..n {
            let si = i - a.m1;
            if !(0..n).contains(&si) {
                continue;
            }
            let r = grid.point(i as usize, j as usize);
            let phase = Complex64::from_polar(1.0, kappa * (r[0] * a2 - r[1] * a1));
            data[(j * n + i) as usize] = phase * psi.data[(sj * n + si) as usize];
        }
    }
    Wavefunction2D::from_data(grid, data)
}

fn translate(
    psi: &Wavefunction2D,
    a: LatticeShift,
    b: f64,
    consts: &PhysicalConstants,
    kind: TranslationKind,
) -> Result<Wavefunction2D, GridError> {
    a.check(psi.grid.n)?;
    psi.check_margin(a.cells())?;
    Ok(translate_unchecked(psi, a, b, consts, kind))
}

/// `T_G(a) psi`.
pub fn translate_passive(
    psi: &Wavefunction2D,
    a: LatticeShift,
    b: f64,
    consts: &PhysicalConstants,
) -> Result<Wavefunction2D, GridError> {
    translate(psi, a, b, consts, TranslationKind::Passive)
}

/// `T_pi(a) psi`.
pub fn translate_active(
    psi: &Wavefunction2D,
    a: LatticeShift,
    b: f64,
    consts: &PhysicalConstants,
) -> Result<Wavefunction2D, GridError> {
    translate(psi, a, b, consts, TranslationKind::Active)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComposePhase {
    /// `arg <T(a+b) psi, T(a) T(b) psi>` in `(-pi, pi]`.
    pub phi: f64,
    pub fidelity: f64,
    /// `+-(e / 2 hbar c) (a x b).B` for passive / active operators.
    pub predicted: f64,
    /// False when fidelity is below [`MIN_FIDELITY`]; `phi` is then meaningless.
    pub valid: bool,
}

pub fn predicted_phase(
    a: [f64; 2],
    b: [f64; 2],
    field: f64,
    consts: &PhysicalConstants,
    kind: TranslationKind,
) -> f64 {
    -kind.phase_sign() * 0.5 * coupling_over_hbar(consts) * (a[0] * b[1] - a[1] * b[0]) * field
}

/// Measure the phase by which `T(a) T(b)` differs from `T(a + b)`.
pub fn compose_phase(
    psi: &Wavefunction2D,
    a: LatticeShift,
    b: LatticeShift,
    field: f64,
    consts: &PhysicalConstants,
    kind: TranslationKind,
) -> Result<ComposePhase, GridError> {
    let n = psi.grid.n;
    a.check(n)?;
    b.check(n)?;
    let sum = a.plus(&b);
    sum.check(n)?;
    let width = (a.m1.unsigned_abs() + b.m1.unsigned_abs())
        .max(a.m2.unsigned_abs() + b.m2.unsigned_abs()) as usize;
    psi.check_margin(width)?;
    let u = translate_unchecked(
        &translate_unchecked(psi, b, field, consts, kind),
        a,
        field,
        consts,
        kind,
    );
    let v = translate_unchecked(psi, sum, field, consts, kind);
    let overlap = v.inner(&u)?;
    let fidelity = overlap.norm() / (u.norm * v.norm);
    let h = psi.grid.h;
    Ok(ComposePhase {
        phi: overlap.arg(),
        fidelity,
        predicted: predicted_phase(a.physical(h), b.physical(h), field, consts, kind),
        valid: fidelity >= MIN_FIDELITY,
    })
}

/// Difference of two phases reduced to `(-pi, pi]`.
pub fn phase_difference(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// Central-difference action of `(1/2m)(-i hbar grad - (e/c) A)^2` with
/// `A = (-B x2 / 2, B x1 / 2)`, expanded as
/// `-hbar^2 lap + 2 i hbar (e/c) A.grad + (e/c)^2 |A|^2` (div A = 0).
pub fn apply_hamiltonian(
    psi: &Wavefunction2D,
    field: f64,
    consts: &PhysicalConstants,
) -> Wavefunction2D {
    let grid = psi.grid;
    let n = grid.n;
    let h = grid.h;
    let hbar = consts.hbar_f64();
    let q = consts.coupling_f64();
    let inv2m = 1.0 / (2.0 * consts.m_f64());
    let zero = Complex64::new(0.0, 0.0);
    let get = |i: isize, j: isize| -> Complex64 {
        if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
            zero
        } else {
            psi.data[j as usize * n + i as usize]
        }
    };
    let mut out = vec![zero; grid.len()];
    for j in 0..n {
        for i in 0..n {
            let (ii, jj) = (i as isize, j as isize);
            let c = get(ii, jj);
            let (e, w, nn, s) = (
                get(ii + 1, jj),
                get(ii - 1, jj),
                get(ii, jj + 1),
                get(ii, jj - 1),
            );
            let lap = (e + w + nn + s - c * 4.0) / (h * h);
            let dx = (e - w) / (2.0 * h);
            let dy = (nn - s) / (2.0 * h);
            let r = grid.point(i, j);
            let a1 = -0.5 * field * r[1];
            let a2 = 0.5 * field * r[0];
            let drift = (dx * a1 + dy * a2) * Complex64::new(0.0, 2.0 * hbar * q);
            let pot = c * (q * q * (a1 * a1 + a2 * a2));
            out[j * n + i] = (lap * (-hbar * hbar) + drift + pot) * inv2m;
        }
    }
    Wavefunction2D::from_data(grid, out)
}

/// `|H T(a) psi - T(a) H psi| / |H psi|`.
pub fn invariance_residual(
    psi: &Wavefunction2D,
    a: LatticeShift,
    field: f64,
    consts: &PhysicalConstants,
    kind: TranslationKind,
) -> Result<f64, GridError> {
    a.check(psi.grid.n)?;
    psi.check_margin(a.cells() + 1)?;
    let hpsi = apply_hamiltonian(psi, field, consts);
    let lhs = apply_hamiltonian(
        &translate_unchecked(psi, a, field, consts, kind),
        field,
        consts,
    );
    let rhs = translate_unchecked(&hpsi, a, field, consts, kind);
    Ok(lhs.sub(&rhs)?.norm() / hpsi.norm())
}

/// `<pi_1>, <pi_2>` with the gauge-covariant difference
/// `pi_k psi(r) = -i hbar [U psi(r + h e_k) - U' psi(r - h e_k)] / 2h`,
/// where the link factors carry the exact line integrals of the symmetric-gauge `A`.
pub fn mean_kinematical_momentum(
    psi: &Wavefunction2D,
    field: f64,
    consts: &PhysicalConstants,
) -> [f64; 2] {
    let grid = psi.grid;
    let n = grid.n;
    let h = grid.h;
    let hbar = consts.hbar_f64();
    let qh = coupling_over_hbar(consts);
    // A_1 = -B x2 / 2 is constant along x1-links, A_2 = B x1 / 2 along x2-links.
    let link = |axis: usize, r: [f64; 2]| -> f64 {
        if axis == 0 {
            -0.5 * field * r[1] * h
        } else {
            0.5 * field * r[0] * h
        }
    };
    let mut out = [0.0; 2];
    for (axis, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            for i in 0..n {
                let r = grid.point(i, j);
                let (fwd, back) = if axis == 0 {
                    (
                        (i + 1 < n).then(|| psi.at(i + 1, j)),
                        (i > 0).then(|| psi.at(i - 1, j)),
                    )
                } else {
                    (
                        (j + 1 < n).then(|| psi.at(i, j + 1)),
                        (j > 0).then(|| psi.at(i, j - 1)),
                    )
                };
                let mut back_r = r;
                back_r[axis] -= h;
                let mut d = Complex64::new(0.0, 0.0);
                if let Some(f) = fwd {
                    d += Complex64::from_polar(1.0, -qh * link(axis, r)) * f;
                }
                if let Some(b) = back {
                    d -= Complex64::from_polar(1.0, qh * link(axis, back_r)) * b;
                }
                acc += psi.at(i, j).conj() * d * Complex64::new(0.0, -hbar / (2.0 * h));
            }
        }
        *slot = acc.re * h * h / (psi.norm * psi.norm);
    }
    out
}

/// Signed flux of `b3` through the triangle `(p0, p1, p2)`, by the centroid
/// rule on `levels^2` congruent sub-triangles.
pub fn triangle_flux(
    b3: &dyn Fn([f64; 2]) -> f64,
    p0: [f64; 2],
    p1: [f64; 2],
    p2: [f64; 2],
    levels: usize,
) -> f64 {
    let e1 = [p1[0] - p0[0], p1[1] - p0[1]];
    let e2 = [p2[0] - p0[0], p2[1] - p0[1]];
    let area = 0.5 * (e1[0] * e2[1] - e1[1] * e2[0]);
    let n = levels.max(1);
    let inv = 1.0 / n as f64;
    let at = |u: f64, v: f64| [p0[0] + u * e1[0] + v * e2[0], p0[1] + u * e1[1] + v * e2[1]];
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..(n - i) {
            let (u, v) = (i as f64 * inv, j as f64 * inv);
            sum += b3(at(u + inv / 3.0, v + inv / 3.0));
            if i + j + 1 < n {
                sum += b3(at(u + 2.0 * inv / 3.0, v + 2.0 * inv / 3.0));
            }
        }
    }
    sum * area / (n * n) as f64
}
