//! Primitive discretised bosonic and fermionic operators.
//!
//! First-quantised bosons live on an `M`-point grid with the position
//! operator diagonal and the momentum operator obtained through the centered
//! DFT. Second-quantised bosons use hard-cutoff ladder operators on `Λ+1`
//! occupation levels. Fermions are Jordan-Wigner strings of Pauli matrices.

use crate::linalg::{
    self, complete_to_unitary, dagger, diag_complex, diag_real, hermiticity_defect, identity,
    loewdin, CMat, C64, I1,
};
use ndarray::Array1;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Default cap on a layout's total Hilbert-space dimension.
pub const DEFAULT_DIM_CAP: usize = 1 << 14;

/// Hermiticity tolerance enforced when `hermitian_hint` is set.
pub const HERMITICITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("grid size must be a positive even integer, got {0}")]
    BadGridSize(usize),
    #[error("boson cutoff must satisfy {0}")]
    BadCutoff(&'static str),
    #[error("total dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operator tagged hermitian deviates from A† by {0:.3e}")]
    NotHermitian(f64),
    #[error("hermite index m={m} outside the supported range m ≤ M/4 = {max}")]
    HermiteIndex { m: usize, max: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Which bosonic representation a layout uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantisation {
    /// Position-grid representation, boson dimension `M` (even).
    FirstQ,
    /// Occupation representation, boson dimension `Λ+1`.
    SecondQ,
}

/// Register layout: fermionic/qubit modes first (site-major, spin-minor),
/// then bosonic registers (site-major). The full space is the tensor
/// product in that order, leftmost factor most significant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    pub num_sites: usize,
    pub fermion_modes_per_site: usize,
    /// Dimension of each bosonic register (`M` in FirstQ, `Λ+1` in SecondQ).
    pub boson_dim: usize,
    /// Number of bosonic registers (equal to `num_sites` for per-site
    /// modes, `1` for a single shared mode, `sites × modes` for multimode).
    pub boson_registers: usize,
    pub quantisation: Quantisation,
}

impl RegisterLayout {
    pub fn new(
        num_sites: usize,
        fermion_modes_per_site: usize,
        boson_dim: usize,
        boson_registers: usize,
        quantisation: Quantisation,
    ) -> Result<Self, OperatorError> {
        Self::with_cap(
            num_sites,
            fermion_modes_per_site,
            boson_dim,
            boson_registers,
            quantisation,
            DEFAULT_DIM_CAP,
        )
    }

    pub fn with_cap(
        num_sites: usize,
        fermion_modes_per_site: usize,
        boson_dim: usize,
        boson_registers: usize,
        quantisation: Quantisation,
        cap: usize,
    ) -> Result<Self, OperatorError> {
        if boson_registers > 0 && boson_dim < 2 {
            return Err(OperatorError::BadCutoff("boson_dim ≥ 2"));
        }
        if quantisation == Quantisation::FirstQ && boson_registers > 0 && boson_dim % 2 != 0 {
            return Err(OperatorError::BadGridSize(boson_dim));
        }
        let layout = RegisterLayout {
            num_sites,
            fermion_modes_per_site,
            boson_dim,
            boson_registers,
            quantisation,
        };
        let dim = layout.total_dim();
        if dim > cap {
            return Err(OperatorError::DimensionCap { dim, cap });
        }
        Ok(layout)
    }

    /// Layout for a single bosonic register with no fermionic modes.
    pub fn boson_only(dim: usize, quantisation: Quantisation) -> Result<Self, OperatorError> {
        Self::new(0, 0, dim, 1, quantisation)
    }

    /// Layout for a bare register of the given dimension (used by generic
    /// diagonal evolutions and block-encoding ancillae).
    pub fn flat(dim: usize) -> Self {
        RegisterLayout {
            num_sites: 0,
            fermion_modes_per_site: 0,
            boson_dim: dim,
            boson_registers: 1,
            quantisation: Quantisation::SecondQ,
        }
    }

    pub fn num_fermion_modes(&self) -> usize {
        self.num_sites * self.fermion_modes_per_site
    }

    pub fn fermion_dim(&self) -> usize {
        1usize << self.num_fermion_modes()
    }

    pub fn boson_total_dim(&self) -> usize {
        self.boson_dim.pow(self.boson_registers as u32)
    }

    pub fn total_dim(&self) -> usize {
        self.fermion_dim() * self.boson_total_dim()
    }
}

/// Dense operator together with the layout it acts on.
#[derive(Debug, Clone)]
pub struct Operator {
    pub matrix: CMat,
    pub layout: RegisterLayout,
    pub hermitian_hint: bool,
}

impl Operator {
    pub fn new(
        matrix: CMat,
        layout: RegisterLayout,
        hermitian_hint: bool,
    ) -> Result<Self, OperatorError> {
        let (r, c) = matrix.dim();
        if r != c || r != layout.total_dim() {
            return Err(OperatorError::DimensionMismatch(format!(
                "matrix is {r}×{c}, layout dimension {}",
                layout.total_dim()
            )));
        }
        if hermitian_hint {
            let dev = hermiticity_defect(&matrix);
            if dev > HERMITICITY_TOL {
                return Err(OperatorError::NotHermitian(dev));
            }
        }
        Ok(Operator {
            matrix,
            layout,
            hermitian_hint,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `‖U†U − I‖_max` of the stored matrix.
    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.matrix)
    }
}

/// Signed grid coordinate of grid index `x`: `√(2π/M)·(−M+2x)/2`.
pub fn grid_point(m: usize, x: usize) -> f64 {
    (2.0 * PI / m as f64).sqrt() * (-(m as f64) + 2.0 * x as f64) / 2.0
}

fn require_even(m: usize) -> Result<(), OperatorError> {
    if m < 2 || m % 2 != 0 {
        return Err(OperatorError::BadGridSize(m));
    }
    Ok(())
}

/// Discretised position operator: `diag(√(2π/M)(−M+2x)/2)`.
pub fn position_op(m: usize) -> Result<Operator, OperatorError> {
    require_even(m)?;
    let d: Vec<f64> = (0..m).map(|x| grid_point(m, x)).collect();
    Operator::new(
        diag_real(&d),
        RegisterLayout::boson_only(m, Quantisation::FirstQ)?,
        true,
    )
}

/// Centered DFT: `[F]_{k,l} = e^{i2πkl/M}/√M` with `k,l ∈ {−M/2..M/2−1}`,
/// returned in grid-index order.
pub fn centered_dft(m: usize) -> Result<Operator, OperatorError> {
    require_even(m)?;
    let mf = m as f64;
    let half = (m / 2) as i64;
    let mut f = CMat::zeros((m, m));
    for r in 0..m {
        for c in 0..m {
            let k = r as i64 - half;
            let l = c as i64 - half;
            let phase = 2.0 * PI * (k * l) as f64 / mf;
            f[(r, c)] = C64::new(phase.cos(), phase.sin()) / mf.sqrt();
        }
    }
    Operator::new(f, RegisterLayout::boson_only(m, Quantisation::FirstQ)?, false)
}

/// Discretised momentum operator, the centered-DFT conjugate of `X^d`,
/// oriented so that `⟨[X,P]⟩ → +i` on low-energy states.
pub fn momentum_op(m: usize) -> Result<Operator, OperatorError> {
    let x = position_op(m)?;
    let f = centered_dft(m)?;
    let p = f.matrix.dot(&x.matrix).dot(&dagger(&f.matrix));
    // Symmetrise away roundoff so the hermitian check passes exactly.
    let p = (&p + &dagger(&p)).mapv(|z| z * 0.5);
    Operator::new(p, x.layout, true)
}

/// Truncated annihilation/creation pair on `Λ+1` levels:
/// `b|n⟩ = √n|n−1⟩`.
pub fn ladder_ops(lambda: usize) -> Result<(Operator, Operator), OperatorError> {
    if lambda == 0 {
        return Err(OperatorError::BadCutoff("Λ ≥ 1"));
    }
    let dim = lambda + 1;
    let mut b = CMat::zeros((dim, dim));
    for n in 1..dim {
        b[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let layout = RegisterLayout::boson_only(dim, Quantisation::SecondQ)?;
    let bdag = dagger(&b);
    Ok((
        Operator::new(b, layout.clone(), false)?,
        Operator::new(bdag, layout, false)?,
    ))
}

/// Normalised Hermite function `ψ_m` sampled on the grid and scaled by
/// `(2π/M)^{1/4}`; evaluated with the stable normalised recurrence.
pub fn hermite_state(m: usize, level: usize) -> Result<Array1<f64>, OperatorError> {
    require_even(m)?;
    if 4 * level > m {
        return Err(OperatorError::HermiteIndex { m: level, max: m / 4 });
    }
    let scale = (2.0 * PI / m as f64).powf(0.25);
    let mut out = Array1::<f64>::zeros(m);
    for x in 0..m {
        let xv = grid_point(m, x);
        let psi0 = PI.powf(-0.25) * (-xv * xv / 2.0).exp();
        let value = if level == 0 {
            psi0
        } else {
            let mut prev = psi0;
            let mut cur = (2.0_f64).sqrt() * xv * psi0;
            for k in 1..level {
                let next = (2.0 / (k as f64 + 1.0)).sqrt() * xv * cur
                    - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
                prev = cur;
                cur = next;
            }
            cur
        };
        out[x] = scale * value;
    }
    Ok(out)
}

/// Discrete Hermite frame `ψ^d_0..ψ^d_{m_max}` on an `M`-point grid.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    pub m: usize,
    pub states: Vec<Array1<f64>>,
}

impl HermiteBasis {
    pub fn new(m: usize, m_max: usize) -> Result<Self, OperatorError> {
        let states = (0..=m_max)
            .map(|lvl| hermite_state(m, lvl))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(HermiteBasis { m, states })
    }

    /// Matrix whose columns are the frame states.
    pub fn frame(&self) -> CMat {
        let mut a = CMat::zeros((self.m, self.states.len()));
        for (j, s) in self.states.iter().enumerate() {
            for (i, &v) in s.iter().enumerate() {
                a[(i, j)] = C64::new(v, 0.0);
            }
        }
        a
    }
}

/// Jordan-Wigner annihilation operators `c_k = Z^{⊗(k−1)} ⊗ (X+iY)/2 ⊗ I…`.
pub fn jw_fermion_ops(num_modes: usize) -> Result<Vec<Operator>, OperatorError> {
    if num_modes == 0 {
        return Err(OperatorError::Invalid("num_modes ≥ 1".into()));
    }
    let dim = 1usize << num_modes;
    if dim > DEFAULT_DIM_CAP {
        return Err(OperatorError::DimensionCap {
            dim,
            cap: DEFAULT_DIM_CAP,
        });
    }
    let z = diag_real(&[1.0, -1.0]);
    let lower = {
        // (X + iY)/2 = |0⟩⟨1| with occupation encoded in the bit value.
        let mut s = CMat::zeros((2, 2));
        s[(0, 1)] = C64::new(1.0, 0.0);
        s
    };
    let id2 = identity(2);
    let layout = RegisterLayout {
        num_sites: num_modes,
        fermion_modes_per_site: 1,
        boson_dim: 0,
        boson_registers: 0,
        quantisation: Quantisation::SecondQ,
    };
    let mut ops = Vec::with_capacity(num_modes);
    for k in 0..num_modes {
        let mut factors: Vec<&CMat> = Vec::with_capacity(num_modes);
        for j in 0..num_modes {
            factors.push(if j < k {
                &z
            } else if j == k {
                &lower
            } else {
                &id2
            });
        }
        let m = linalg::kron_all(&factors);
        ops.push(Operator::new(m, layout.clone(), false)?);
    }
    Ok(ops)
}

/// First-quantised displacement `e^{−iαP}`, realised as
/// `F·diag(e^{−iα x_k})·F⁻¹`; exactly unitary up to roundoff.
pub fn displacement_1q(m: usize, alpha: f64) -> Result<Operator, OperatorError> {
    require_even(m)?;
    if !alpha.is_finite() {
        return Err(OperatorError::Invalid("displacement must be finite".into()));
    }
    let f = centered_dft(m)?.matrix;
    let phases: Vec<C64> = (0..m)
        .map(|x| (-I1 * alpha * grid_point(m, x)).exp())
        .collect();
    let d = f.dot(&diag_complex(&phases)).dot(&dagger(&f));
    Operator::new(d, RegisterLayout::boson_only(m, Quantisation::FirstQ)?, false)
}

/// Second-quantised displacement `exp(αb† − α*b)` on the truncated register.
pub fn displacement_2q(lambda: usize, alpha: C64) -> Result<Operator, OperatorError> {
    let (b, bdag) = ladder_ops(lambda)?;
    let gen = &bdag.matrix.mapv(|z| z * alpha) - &b.matrix.mapv(|z| z * alpha.conj());
    let d = linalg::exp_antihermitian(&gen);
    Operator::new(d, b.layout, false)
}

/// Quantum Hermite transform: an `M×M` unitary whose first `Λ+1` columns are
/// the Löwdin-orthonormalised Hermite frame, deterministically completed.
pub fn qht(m: usize, lambda: usize) -> Result<Operator, OperatorError> {
    require_even(m)?;
    if 4 * (lambda + 1) > m {
        return Err(OperatorError::BadCutoff("Λ+1 ≤ M/4"));
    }
    let basis = HermiteBasis::new(m, lambda)?;
    let q = loewdin(&basis.frame());
    let u = complete_to_unitary(&q);
    Operator::new(u, RegisterLayout::boson_only(m, Quantisation::FirstQ)?, false)
}

/// Embed per-register operators into the full layout space:
/// `fermion_part ⊗ boson_parts[0] ⊗ … ⊗ boson_parts[R−1]`.
pub fn embed(
    layout: &RegisterLayout,
    fermion_part: Option<&CMat>,
    boson_parts: &[(usize, &CMat)],
) -> CMat {
    let id_f = identity(layout.fermion_dim());
    let id_b = identity(layout.boson_dim);
    let mut factors: Vec<&CMat> = Vec::with_capacity(1 + layout.boson_registers);
    factors.push(fermion_part.unwrap_or(&id_f));
    let mut slots: Vec<&CMat> = vec![&id_b; layout.boson_registers];
    for &(reg, mat) in boson_parts {
        slots[reg] = mat;
    }
    factors.extend(slots);
    if layout.boson_registers == 0 {
        factors.truncate(1);
    }
    linalg::kron_all(&factors)
}

/// Single-mode boson operator for the layout's quantisation:
/// `ω₀b†b` (SecondQ) or `(ω₀/2)(X²+P²)` (FirstQ).
pub fn single_mode_hb(dim: usize, quantisation: Quantisation, omega0: f64) -> CMat {
    match quantisation {
        Quantisation::SecondQ => {
            let d: Vec<f64> = (0..dim).map(|n| omega0 * n as f64).collect();
            diag_real(&d)
        }
        Quantisation::FirstQ => {
            let x = position_op(dim).expect("even grid").matrix;
            let p = momentum_op(dim).expect("even grid").matrix;
            (&x.dot(&x) + &p.dot(&p)).mapv(|z| z * (omega0 / 2.0))
        }
    }
}

/// Coupling quadrature for the layout's quantisation: `b+b†` (SecondQ)
/// or `√2·X` (FirstQ), so that both have the same continuum limit.
pub fn coupling_quadrature(dim: usize, quantisation: Quantisation) -> CMat {
    match quantisation {
        Quantisation::SecondQ => {
            let mut m = CMat::zeros((dim, dim));
            for n in 1..dim {
                let v = C64::new((n as f64).sqrt(), 0.0);
                m[(n - 1, n)] = v;
                m[(n, n - 1)] = v;
            }
            m
        }
        Quantisation::FirstQ => position_op(dim)
            .expect("even grid")
            .matrix
            .mapv(|z| z * (2.0_f64).sqrt()),
    }
}

/// Displacement operator for either quantisation with the *same* amplitude
/// convention as the polaron α tables: FirstQ displaces the position by
/// `alpha`, SecondQ applies `exp(α(b†−b))`.
pub fn displacement_for(
    dim: usize,
    quantisation: Quantisation,
    alpha: f64,
) -> Result<CMat, OperatorError> {
    match quantisation {
        Quantisation::FirstQ => Ok(displacement_1q(dim, alpha)?.matrix),
        Quantisation::SecondQ => Ok(displacement_2q(dim - 1, C64::new(alpha, 0.0))?.matrix),
    }
}

/// Pauli matrices used by model builders.
pub fn pauli_x() -> CMat {
    let mut m = CMat::zeros((2, 2));
    m[(0, 1)] = C64::new(1.0, 0.0);
    m[(1, 0)] = C64::new(1.0, 0.0);
    m
}

pub fn pauli_y() -> CMat {
    let mut m = CMat::zeros((2, 2));
    m[(0, 1)] = C64::new(0.0, -1.0);
    m[(1, 0)] = C64::new(0.0, 1.0);
    m
}

pub fn pauli_z() -> CMat {
    diag_real(&[1.0, -1.0])
}
