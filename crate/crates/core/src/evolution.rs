//! Propagators: the exact oracle, fast-forwarded diagonal and oscillator
//! evolutions, and the interaction-picture truncated-Dyson pipeline.
//!
//! The Dyson segment is the weakly-ordered left-endpoint discretisation
//! `Σ_k (−iΔt/L)^k Σ_{l₁≤…≤l_k} V(s_{l_k})…V(s_{l_1})`; the pipeline
//! evaluates it in the eigenbasis of `H̃₀`, where the time grid enters as
//! elementwise phases and the sum over lattice points merges by range
//! doubling, giving the same matrix as the direct recursion.

use crate::linalg::{
    dagger, diag_complex, eigh, identity, max_abs, sandwich, spectral_norm, CMat, CVec, C64, I1,
};
use crate::models::hh_hamiltonian;
use crate::operators::{
    embed, position_op, Operator, OperatorError, Quantisation, RegisterLayout,
};
use crate::polaron::{build_polaron_hh, conjugate, hh_transformed_fermion_diag, transformed_h0_hh};
use serde::{Deserialize, Serialize};

/// Per-segment dimensionless time constant with `Σ_{k≤K} t₀^k/k! ≈ 2`.
pub const T0: f64 = 0.7;

/// Plan for one interaction-picture run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DysonPlan {
    /// Segment count.
    pub r: usize,
    /// Dyson truncation order.
    pub k: usize,
    /// Time-grid points per segment.
    pub l: usize,
    pub t0: f64,
    /// Segment duration `t/r`.
    pub dt: f64,
    /// Total target error.
    pub eps_budget: f64,
    /// Budget fractions (truncation, grid, H̃₀ evolution).
    pub split: (f64, f64, f64),
}

impl DysonPlan {
    pub fn validate(&self) -> Result<(), OperatorError> {
        if self.r < 1 || self.k < 1 || self.l < 2 {
            return Err(OperatorError::Invalid(
                "plan requires r ≥ 1, K ≥ 1, L ≥ 2".into(),
            ));
        }
        let mut sum = 0.0;
        let mut fact = 1.0;
        for j in 0..=self.k {
            if j > 0 {
                fact *= j as f64;
            }
            sum += self.t0.powi(j as i32) / fact;
        }
        if sum > 2.0 + 2e-2 {
            return Err(OperatorError::Invalid(format!(
                "Σ t₀^k/k! = {sum:.4} exceeds the normalisation bound"
            )));
        }
        let s = self.split.0 + self.split.1 + self.split.2;
        if (s - 1.0).abs() > 1e-12 {
            return Err(OperatorError::Invalid("split fractions must sum to 1".into()));
        }
        Ok(())
    }
}

/// `e^{−iHt}` through the eigendecomposition oracle.
pub fn exact_evolution(h: &Operator, t: f64) -> Result<Operator, OperatorError> {
    let dev = crate::linalg::hermiticity_defect(&h.matrix);
    if dev > 1e-10 {
        return Err(OperatorError::NotHermitian(dev));
    }
    let u = crate::linalg::expi_hermitian(&h.matrix, t);
    Operator::new(u, h.layout.clone(), false)
}

/// Number of binary fraction bits for phase rounding:
/// `k = ⌈log₂(1.053·|t|/ε′)⌉`, clamped to ≥ 0.
pub fn phase_rounding_bits(t: f64, eps_prime: f64) -> Result<u32, OperatorError> {
    if !(eps_prime > 0.0 && eps_prime <= 0.1) {
        return Err(OperatorError::Invalid("ε′ ∈ (0, 0.1] required".into()));
    }
    if t == 0.0 {
        return Ok(0);
    }
    let x = 1.053 * t.abs() / eps_prime;
    Ok(x.log2().ceil().max(0.0) as u32)
}

fn round_to_bits(x: f64, k: u32) -> f64 {
    let scale = (2.0_f64).powi(k as i32);
    (x * scale).round() / scale
}

/// Fast-forwarded diagonal evolution with `k`-bit rounded eigenvalues;
/// guarantees `‖result − exact‖₂ ≤ ε′`.
pub fn diagonal_evolution_rounded(
    d: impl Fn(usize) -> f64,
    dim: usize,
    t: f64,
    eps_prime: f64,
) -> Result<Operator, OperatorError> {
    let k = phase_rounding_bits(t, eps_prime)?;
    let phases: Vec<C64> = (0..dim)
        .map(|x| (-I1 * round_to_bits(d(x), k) * t).exp())
        .collect();
    Operator::new(
        diag_complex(&phases),
        RegisterLayout::flat(dim),
        false,
    )
}

/// Rounded phase factors for a precomputed diagonal (same rounding rule).
pub fn rounded_phases(values: &[f64], t: f64, eps_prime: f64) -> Result<Vec<C64>, OperatorError> {
    let k = phase_rounding_bits(t, eps_prime)?;
    Ok(values
        .iter()
        .map(|&v| (-I1 * round_to_bits(v, k) * t).exp())
        .collect())
}

/// Five-factor split of the discrete oscillator evolution
/// `e^{−i(X²+P²)(ω₀τ/2)}`: diagonal phase factors in position and momentum,
/// `a(s) = tan(s/2)/2`, `b(s) = sin(s)/2`, `s = ω₀τ`. Exactly unitary;
/// accurate on low-energy states.
pub fn qho_factored_evolution(
    m: usize,
    tau: f64,
    omega0: f64,
) -> Result<Operator, OperatorError> {
    let s = omega0 * tau;
    if s.abs() >= std::f64::consts::PI {
        return Err(OperatorError::Invalid(format!(
            "|ω₀τ| = {:.3} ≥ π; split τ into shorter slices",
            s.abs()
        )));
    }
    let x = position_op(m)?;
    let f = crate::operators::centered_dft(m)?.matrix;
    let a = (s / 4.0).tan() / 2.0;
    let b = (s / 2.0).sin() / 2.0;
    let phase_x = |c: f64| -> CMat {
        let d: Vec<C64> = (0..m)
            .map(|i| {
                let xv = x.matrix[(i, i)].re;
                (-I1 * c * xv * xv).exp()
            })
            .collect();
        diag_complex(&d)
    };
    let phase_p = |c: f64| -> CMat { sandwich(&f, &phase_x(c)) };
    let u = phase_p(a)
        .dot(&phase_x(b))
        .dot(&phase_p(2.0 * a))
        .dot(&phase_x(b))
        .dot(&phase_p(a));
    Operator::new(u, x.layout, false)
}

/// Oscillator factor with automatic halving once `|ω₀τ| ≥ π`.
fn qho_factored_with_halving(
    m: usize,
    tau: f64,
    omega0: f64,
) -> Result<CMat, OperatorError> {
    let mut halvings = 0u32;
    while (omega0 * tau / (2.0_f64).powi(halvings as i32)).abs()
        >= std::f64::consts::PI * 0.999
    {
        halvings += 1;
        if halvings > 40 {
            return Err(OperatorError::Invalid("τ too large to halve".into()));
        }
    }
    let base = qho_factored_evolution(m, tau / (2.0_f64).powi(halvings as i32), omega0)?.matrix;
    let mut u = base;
    for _ in 0..halvings {
        u = u.dot(&u);
    }
    Ok(u)
}

/// Fast-forwarded `e^{−iH̃₀τ}` for first-quantised Hubbard-Holstein:
/// per-site five-factor oscillator evolutions times rounded phases on the
/// transformed fermionic diagonal.
pub fn h0_fastforward_hh(
    p: &crate::models::HubbardHolsteinParams,
    tau: f64,
    eps_diag: f64,
) -> Result<Operator, OperatorError> {
    if p.quantisation != Quantisation::FirstQ {
        return Err(OperatorError::Invalid(
            "h0_fastforward_hh is first-quantised; SecondQ H̃₀ is diagonal".into(),
        ));
    }
    let layout = p.layout()?;
    let m = layout.boson_dim;
    if tau == 0.0 {
        return Operator::new(identity(layout.total_dim()), layout, false);
    }
    let site_u = qho_factored_with_halving(m, tau, p.omega0)?;
    let mut u = identity(layout.total_dim());
    for i in 0..p.n_sites {
        u = u.dot(&embed(&layout, None, &[(i, &site_u)]));
    }
    let fvals = hh_transformed_fermion_diag(p);
    let phases = rounded_phases(&fvals, tau, eps_diag)?;
    let fdiag = diag_complex(&phases);
    u = u.dot(&embed(&layout, Some(&fdiag), &[]));
    Operator::new(u, layout, false)
}

/// Truncation/discretisation plan: `r = ⌈‖V‖t/t₀⌉`, smallest `K` with
/// `2t₀^{K+1}/(K+1)! ≤ ε/(2r)`, `L = ⌈(t/r)²·dVdt/(ε/(2r))⌉`.
pub fn dyson_truncation_params(
    t: f64,
    eps: f64,
    v_norm: f64,
    dvdt_bound: f64,
) -> Result<DysonPlan, OperatorError> {
    if t <= 0.0 || v_norm <= 0.0 || dvdt_bound < 0.0 {
        return Err(OperatorError::Invalid(
            "t > 0, ‖V‖ > 0 and dV/dt ≥ 0 required".into(),
        ));
    }
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(OperatorError::Invalid("ε ∈ (0, 0.1] required".into()));
    }
    let r = ((v_norm * t / T0).ceil() as usize).max(1);
    let eps_per = eps / (2.0 * r as f64);
    let mut k = 1usize;
    let mut fact = 2.0; // (k+1)! at k = 1
    while 2.0 * T0.powi(k as i32 + 1) / fact > eps_per {
        k += 1;
        fact *= (k + 1) as f64;
        if k > 60 {
            break;
        }
    }
    let dt = t / r as f64;
    let l = ((dt * dt * dvdt_bound / eps_per).ceil() as usize).max(2);
    let plan = DysonPlan {
        r,
        k,
        l,
        t0: T0,
        dt,
        eps_budget: eps,
        split: (0.5, 0.5, 0.0),
    };
    plan.validate()?;
    Ok(plan)
}

/// Default derivative bound `‖dV/ds‖ ≤ 2‖H₀‖‖V‖` from `dV/ds = i[H₀, V(s)]`.
pub fn default_dvdt_bound(h0_norm: f64, v_norm: f64) -> f64 {
    2.0 * h0_norm * v_norm
}

/// Number of weakly-ordered index tuples `C(L+K−1, K)` summed by a segment.
pub fn simplex_term_count(l: usize, k: usize) -> Option<u128> {
    let mut count: u128 = 1;
    for j in 0..k {
        count = count.checked_mul((l + j) as u128)?;
        count /= (j + 1) as u128;
    }
    Some(count)
}

const SIMPLEX_TERM_CAP: u128 = 1 << 100;

/// One truncated-Dyson segment
/// `Σ_{k=0}^{K} (−iΔt/L)^k Σ_{0≤l₁≤…≤l_k<L} V(s_{l_k})…V(s_{l_1})`,
/// with `V(s) = U₀(s)†·V·U₀(s)` read from the supplied evolution.
pub fn dyson_segment(
    h0_evolution: &dyn Fn(f64) -> CMat,
    v: &Operator,
    dt: f64,
    k: usize,
    l: usize,
) -> Result<Operator, OperatorError> {
    if dt <= 0.0 {
        return Err(OperatorError::Invalid("Δt > 0 required".into()));
    }
    match simplex_term_count(l, k) {
        Some(c) if c <= SIMPLEX_TERM_CAP => {}
        _ => {
            return Err(OperatorError::Invalid(format!(
                "simplex grid K={k}, L={l} exceeds the term cap"
            )))
        }
    }
    let dim = v.dim();
    let mut s: Vec<CMat> = Vec::with_capacity(k + 1);
    s.push(identity(dim));
    for _ in 0..k {
        s.push(CMat::zeros((dim, dim)));
    }
    let h = dt / l as f64;
    for li in 0..l {
        let u0 = h0_evolution(li as f64 * h);
        let v_l = sandwich(&dagger(&u0), &v.matrix);
        for j in 1..=k {
            let prod = v_l.dot(&s[j - 1]);
            s[j] = &s[j] + &prod;
        }
    }
    let mut u = CMat::zeros((dim, dim));
    let step = -I1 * h;
    let mut coeff = C64::new(1.0, 0.0);
    for (j, sj) in s.iter().enumerate() {
        if j > 0 {
            coeff *= step;
        }
        u = u + &sj.mapv(|z| z * coeff);
    }
    Operator::new(u, v.layout.clone(), false)
}

/// Chain sums `S_0..S_K` over a lattice range, in the `H̃₀` eigenbasis.
struct ChainSums {
    mats: Vec<CMat>,
    len: usize,
}

/// Segment evaluation by range doubling in the `H̃₀` eigenbasis:
/// identical sum to `dyson_segment`, `O(log L)` merges.
pub fn dyson_segment_spectral(
    h0_eigvals: &[f64],
    v_eig: &CMat,
    dt: f64,
    k: usize,
    l: usize,
) -> Result<CMat, OperatorError> {
    if dt <= 0.0 || l < 1 {
        return Err(OperatorError::Invalid("Δt > 0 and L ≥ 1 required".into()));
    }
    match simplex_term_count(l, k) {
        Some(c) if c <= SIMPLEX_TERM_CAP => {}
        _ => {
            return Err(OperatorError::Invalid(format!(
                "simplex grid K={k}, L={l} exceeds the term cap"
            )))
        }
    }
    let dim = v_eig.nrows();
    let h = dt / l as f64;
    let shift_diag = |s: &ChainSums, offset: usize| -> Vec<CMat> {
        // Chains at lattice points shifted by `offset`:
        // E·S_j·E† with E = diag(e^{i d offset h}).
        let e: Vec<C64> = h0_eigvals
            .iter()
            .map(|&d| (I1 * d * (offset as f64) * h).exp())
            .collect();
        s.mats
            .iter()
            .map(|m| {
                let mut out = m.clone();
                for r in 0..dim {
                    for c in 0..dim {
                        out[(r, c)] = e[r] * m[(r, c)] * e[c].conj();
                    }
                }
                out
            })
            .collect()
    };
    let merge = |lower: &ChainSums, upper: &ChainSums| -> ChainSums {
        let upper_shifted = shift_diag(upper, lower.len);
        let mut mats = Vec::with_capacity(k + 1);
        for j in 0..=k {
            // S_j[lower ∪ upper] = Σ_{j2+j1=j} S_{j2}^upper · S_{j1}^lower
            let mut acc = lower.mats[j].clone(); // j2 = 0 term
            for j2 in 1..=j {
                let j1 = j - j2;
                if j1 == 0 {
                    acc = &acc + &upper_shifted[j2];
                } else {
                    acc = &acc + &upper_shifted[j2].dot(&lower.mats[j1]);
                }
            }
            mats.push(acc);
        }
        ChainSums { mats, len: lower.len + upper.len }
    };

    // Base block: a single lattice point at s = 0, S_j = V^j.
    let mut base_mats = vec![identity(dim)];
    for j in 1..=k {
        let prev = base_mats[j - 1].clone();
        base_mats.push(v_eig.dot(&prev));
    }
    let mut block = ChainSums { mats: base_mats, len: 1 };
    let mut acc: Option<ChainSums> = None;
    let mut remaining = l;
    loop {
        if remaining & 1 == 1 {
            acc = Some(match acc {
                None => ChainSums {
                    mats: block.mats.clone(),
                    len: block.len,
                },
                Some(a) => merge(&a, &block),
            });
        }
        remaining >>= 1;
        if remaining == 0 {
            break;
        }
        block = merge(&block, &block);
    }
    let acc = acc.expect("L ≥ 1");

    let mut u = CMat::zeros((dim, dim));
    let step = -I1 * h;
    let mut coeff = C64::new(1.0, 0.0);
    for (j, sj) in acc.mats.iter().enumerate() {
        if j > 0 {
            coeff *= step;
        }
        u = u + &sj.mapv(|z| z * coeff);
    }
    Ok(u)
}

/// Interaction frame of a Hubbard-Holstein instance: the transform, the
/// analytic `H̃₀`, the residual interaction `Ṽ = 𝒟H𝒟† − H̃₀`, and the
/// `H̃₀` eigenbasis data the segment evaluation works in.
pub struct InteractionFrame {
    pub h_total: Operator,
    pub transform: crate::polaron::PolaronTransform,
    pub h0_tilde: Operator,
    pub v_tilde: CMat,
    /// Eigenvalues of `H̃₀`.
    pub h0_eigvals: Vec<f64>,
    /// Eigenbasis (None when `H̃₀` is already diagonal, i.e. SecondQ).
    pub basis: Option<CMat>,
    pub v_eig: CMat,
    pub v_norm: f64,
    pub h0_norm: f64,
}

/// Diagonal values of the second-quantised `H̃₀` over the full basis.
pub fn h0_tilde_diag_2q(p: &crate::models::HubbardHolsteinParams) -> Result<Vec<f64>, OperatorError> {
    if p.quantisation != Quantisation::SecondQ {
        return Err(OperatorError::Invalid("SecondQ only".into()));
    }
    let layout = p.layout()?;
    let fvals = hh_transformed_fermion_diag(p);
    let btot = layout.boson_total_dim();
    let bdim = layout.boson_dim;
    let mut out = Vec::with_capacity(layout.total_dim());
    for fv in fvals {
        for b in 0..btot {
            let mut occ_sum = 0usize;
            let mut rest = b;
            for _ in 0..layout.boson_registers {
                occ_sum += rest % bdim;
                rest /= bdim;
            }
            out.push(fv + p.omega0 * occ_sum as f64);
        }
    }
    Ok(out)
}

pub fn hh_interaction_frame(
    p: &crate::models::HubbardHolsteinParams,
) -> Result<InteractionFrame, OperatorError> {
    let ops = hh_hamiltonian(p)?;
    let h_total = ops.total();
    let transform = build_polaron_hh(p)?;
    let h0_tilde = transformed_h0_hh(p)?;
    let h_tilde = conjugate(&h_total, &transform.unitary)?;
    let v_tilde = &h_tilde.matrix - &h0_tilde.matrix;
    let (h0_eigvals, basis, v_eig) = match p.quantisation {
        Quantisation::SecondQ => {
            let d = h0_tilde_diag_2q(p)?;
            (d, None, v_tilde.clone())
        }
        Quantisation::FirstQ => {
            let (vals, w) = eigh(&h0_tilde.matrix);
            let v_eig = sandwich(&dagger(&w), &v_tilde);
            (vals.to_vec(), Some(w), v_eig)
        }
    };
    let v_norm = spectral_norm(&v_tilde);
    let h0_norm = h0_eigvals.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    Ok(InteractionFrame {
        h_total,
        transform,
        h0_tilde,
        v_tilde,
        h0_eigvals,
        basis,
        v_eig,
        v_norm,
        h0_norm,
    })
}

/// Full interaction-picture propagator
/// `𝒟†·[e^{−iH̃₀Δt}·DysonSegment(Ṽ)]^r·𝒟 ≈ e^{−iHt}`, with the plan chosen
/// by `dyson_truncation_params`. Returns the propagator and the plan.
pub fn interaction_picture_evolution_with_plan(
    p: &crate::models::HubbardHolsteinParams,
    t: f64,
    eps: f64,
) -> Result<(Operator, DysonPlan), OperatorError> {
    let layout = p.layout()?;
    if t == 0.0 {
        let plan = DysonPlan {
            r: 1,
            k: 1,
            l: 2,
            t0: T0,
            dt: 0.0,
            eps_budget: eps,
            split: (0.5, 0.5, 0.0),
        };
        return Ok((
            Operator::new(identity(layout.total_dim()), layout, false)?,
            plan,
        ));
    }
    let frame = hh_interaction_frame(p)?;
    let plan = dyson_truncation_params(
        t,
        eps,
        frame.v_norm,
        default_dvdt_bound(frame.h0_norm, frame.v_norm),
    )?;
    let seg_eig = dyson_segment_spectral(&frame.h0_eigvals, &frame.v_eig, plan.dt, plan.k, plan.l)?;

    // e^{−iH̃₀Δt}·segment, assembled in whichever basis H̃₀ is diagonal.
    let step_times_seg = match p.quantisation {
        Quantisation::SecondQ => {
            let phases: Vec<C64> = frame
                .h0_eigvals
                .iter()
                .map(|&d| (-I1 * d * plan.dt).exp())
                .collect();
            let mut m = seg_eig;
            for r in 0..m.nrows() {
                let ph = phases[r];
                for c in 0..m.ncols() {
                    m[(r, c)] *= ph;
                }
            }
            m
        }
        Quantisation::FirstQ => {
            let w = frame.basis.as_ref().expect("FirstQ basis");
            let seg = sandwich(w, &seg_eig);
            let eps_h0 = eps / (4.0 * plan.r as f64);
            let step = h0_fastforward_hh(p, plan.dt, eps_h0)?;
            step.matrix.dot(&seg)
        }
    };
    let mut u = identity(layout.total_dim());
    for _ in 0..plan.r {
        u = step_times_seg.dot(&u);
    }
    if p.quantisation == Quantisation::SecondQ {
        // Still in the computational basis; nothing to rotate.
    }
    let d = &frame.transform.unitary.matrix;
    let full = dagger(d).dot(&u).dot(d);
    Ok((Operator::new(full, layout, false)?, plan))
}

pub fn interaction_picture_evolution(
    p: &crate::models::HubbardHolsteinParams,
    t: f64,
    eps: f64,
) -> Result<Operator, OperatorError> {
    Ok(interaction_picture_evolution_with_plan(p, t, eps)?.0)
}

/// Both sides of the observable-pushing identity
/// `⟨ψ|e^{iHt}Oe^{−iHt}|ψ⟩ = ⟨𝒟ψ|e^{iH̃t}Õe^{−iH̃t}|𝒟ψ⟩`, `Õ = 𝒟O𝒟†`,
/// each evaluated with the exact propagator.
pub fn expectation_pushing_check(
    p: &crate::models::HubbardHolsteinParams,
    t: f64,
    state: &CVec,
    o: &Operator,
) -> Result<(f64, f64), OperatorError> {
    let ops = hh_hamiltonian(p)?;
    let h = ops.total();
    if state.len() != h.dim() || o.dim() != h.dim() {
        return Err(OperatorError::DimensionMismatch(
            "state/observable must match the model dimension".into(),
        ));
    }
    let dev = crate::linalg::hermiticity_defect(&o.matrix);
    if dev > 1e-10 {
        return Err(OperatorError::NotHermitian(dev));
    }
    let u = exact_evolution(&h, t)?;
    let evolved = u.matrix.dot(state);
    let lhs: C64 = expectation(&evolved, &o.matrix);

    let d = build_polaron_hh(p)?;
    let h_tilde = conjugate(&h, &d.unitary)?;
    let o_tilde = conjugate(o, &d.unitary)?;
    let u_tilde = exact_evolution(
        &Operator::new(
            (&h_tilde.matrix + &dagger(&h_tilde.matrix)).mapv(|z| z * 0.5),
            h_tilde.layout.clone(),
            true,
        )?,
        t,
    )?;
    let pushed = u_tilde.matrix.dot(&d.unitary.matrix.dot(state));
    let rhs: C64 = expectation(&pushed, &o_tilde.matrix);
    Ok((lhs.re, rhs.re))
}

fn expectation(state: &CVec, o: &CMat) -> C64 {
    let ov = o.dot(state);
    state.iter().zip(ov.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Projector columns onto the low-energy subspace used to score
/// first-quantised runs: per boson register, the lowest quarter of the
/// Hermite frame; identity on fermions.
pub fn low_energy_columns(
    p: &crate::models::HubbardHolsteinParams,
) -> Result<CMat, OperatorError> {
    let layout = p.layout()?;
    match p.quantisation {
        Quantisation::SecondQ => Ok(identity(layout.total_dim())),
        Quantisation::FirstQ => {
            let m = layout.boson_dim;
            let low = (m / 4).max(1);
            let u = crate::operators::qht(m, low - 1)?;
            let q1 = u.matrix.slice(ndarray::s![.., ..low]).to_owned();
            let mut q = identity(layout.fermion_dim());
            for _ in 0..layout.boson_registers {
                q = crate::linalg::kron(&q, &q1);
            }
            Ok(q)
        }
    }
}

/// `‖(U_approx − U_exact)·Q‖₂` where `Q` is the quantisation-appropriate
/// comparison subspace (full space in SecondQ).
pub fn propagator_error(
    p: &crate::models::HubbardHolsteinParams,
    u_approx: &Operator,
    t: f64,
) -> Result<f64, OperatorError> {
    let ops = hh_hamiltonian(p)?;
    let exact = exact_evolution(&ops.total(), t)?;
    let diff = &u_approx.matrix - &exact.matrix;
    let q = low_energy_columns(p)?;
    Ok(spectral_norm(&diff.dot(&q)))
}

/// Independent time-ordered-propagator oracle: `1000` midpoint product
/// steps `Π exp(−iV(s_mid)h)` with each factor exponentiated to machine
/// precision, evaluated in the `H̃₀` eigenbasis.
pub mod oracles {
    use super::*;

    /// `V(s) = Φ(s)∘V` elementwise in the eigenbasis.
    fn v_at(h0_eigvals: &[f64], v_eig: &CMat, s: f64) -> CMat {
        let dim = v_eig.nrows();
        let e: Vec<C64> = h0_eigvals.iter().map(|&d| (I1 * d * s).exp()).collect();
        let mut out = v_eig.clone();
        for r in 0..dim {
            for c in 0..dim {
                out[(r, c)] = e[r] * v_eig[(r, c)] * e[c].conj();
            }
        }
        out
    }

    /// Fourth-order Taylor factor `exp(−iVh)`; the step is small enough
    /// that the remainder is far below every tested tolerance.
    fn exp_factor(v: &CMat, h: f64) -> CMat {
        let dim = v.nrows();
        let a = v.mapv(|z| z * (-I1 * h));
        let mut term = identity(dim);
        let mut sum = identity(dim);
        for j in 1..=4 {
            term = a.dot(&term).mapv(|z| z / j as f64);
            sum = &sum + &term;
        }
        sum
    }

    /// Time-ordered exponential `𝒯 exp(−i∫₀^{Δt} V(s) ds)` by midpoint
    /// product integration with the given number of uniform steps.
    pub fn time_ordered_propagator(
        h0_eigvals: &[f64],
        v_eig: &CMat,
        dt: f64,
        steps: usize,
    ) -> CMat {
        let dim = v_eig.nrows();
        let h = dt / steps as f64;
        let mut u = identity(dim);
        for j in 0..steps {
            let s_mid = (j as f64 + 0.5) * h;
            let f = exp_factor(&v_at(h0_eigvals, v_eig, s_mid), h);
            u = f.dot(&u);
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, unitarity_defect};
    use crate::models::{BoundaryCondition, HubbardHolsteinParams};
    use crate::operators::hermite_state;

    fn hh_params(
        n: usize,
        g: f64,
        cutoff: usize,
        quantisation: Quantisation,
    ) -> HubbardHolsteinParams {
        HubbardHolsteinParams {
            n_sites: n,
            g,
            omega0: 1.0,
            u: 1.0,
            mu: 0.0,
            cutoff,
            quantisation,
            boundary: BoundaryCondition::Open,
            max_dim: None,
        }
    }

    #[test]
    fn exact_evolution_basics() {
        let p = hh_params(1, 0.5, 4, Quantisation::SecondQ);
        let h = hh_hamiltonian(&p).unwrap().total();
        let u0 = exact_evolution(&h, 0.0).unwrap();
        assert!(max_abs_diff(&u0.matrix, &identity(h.dim())) < 1e-13);
        let up = exact_evolution(&h, 0.7).unwrap();
        let um = exact_evolution(&h, -0.7).unwrap();
        assert!(max_abs_diff(&up.matrix.dot(&um.matrix), &identity(h.dim())) < 1e-12);
        // Energy conservation on a fixed state.
        let dim = h.dim();
        let state: CVec = (0..dim)
            .map(|i| C64::new((i as f64 * 0.13).sin(), (i as f64 * 0.29).cos()))
            .collect::<Vec<_>>()
            .into();
        let nrm = state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let state = state.mapv(|z| z / nrm);
        let before = expectation(&state, &h.matrix);
        let after = expectation(&up.matrix.dot(&state), &h.matrix);
        assert!((before.re - after.re).abs() < 1e-10);
    }

    #[test]
    fn phase_bits_formula() {
        // t = 10, ε′ = 0.01 → ⌈log₂ 1053⌉ = 11
        assert_eq!(phase_rounding_bits(10.0, 0.01).unwrap(), 11);
        assert!(phase_rounding_bits(1.0, 0.2).is_err());
    }

    #[test]
    fn diagonal_rounding_meets_bound() {
        let dim = 64;
        let mut seed = 0x2545f4914f6cdd1du64;
        let mut rand01 = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..100 {
            let vals: Vec<f64> = (0..dim).map(|_| 4.0 * rand01() - 2.0).collect();
            let t = 0.1 + 9.9 * rand01();
            let eps = 1e-3 + 0.09 * rand01();
            let rounded = diagonal_evolution_rounded(|i| vals[i], dim, t, eps)
                .unwrap()
                .matrix;
            // Exact diagonal phases.
            let mut worst = 0.0_f64;
            for i in 0..dim {
                let exact = (-I1 * vals[i] * t).exp();
                worst = worst.max((rounded[(i, i)] - exact).norm());
            }
            assert!(worst <= eps, "trial {trial}: {worst} > {eps}");
        }
        let zero = diagonal_evolution_rounded(|_| 0.0, 8, 3.0, 1e-3).unwrap();
        assert!(max_abs_diff(&zero.matrix, &identity(8)) < 1e-15);
    }

    #[test]
    fn qho_factored_split_properties() {
        let u0 = qho_factored_evolution(16, 0.0, 1.0).unwrap();
        assert!(max_abs_diff(&u0.matrix, &identity(16)) < 1e-15);
        assert!(qho_factored_evolution(16, 3.2, 1.0).is_err());

        let m = 32;
        let tau = 0.3;
        let u = qho_factored_evolution(m, tau, 1.0).unwrap();
        assert!(u.unitarity_defect() < 1e-12);
        let v0 = hermite_state(m, 0).unwrap().mapv(|x| C64::new(x, 0.0));
        let amp: C64 = v0
            .iter()
            .zip(u.matrix.dot(&v0).iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        let expect = (-I1 * (tau / 2.0)).exp();
        assert!((amp - expect).norm() < 1e-6, "phase {amp} vs {expect}");
    }

    #[test]
    fn qho_factored_error_decreases_on_low_span() {
        let tau = 0.3;
        let mut prev = f64::INFINITY;
        for m in [16usize, 32, 64] {
            let hb = crate::operators::single_mode_hb(m, Quantisation::FirstQ, 1.0);
            let layout = RegisterLayout::boson_only(m, Quantisation::FirstQ).unwrap();
            let exact = exact_evolution(&Operator::new(hb, layout, true).unwrap(), tau).unwrap();
            let approx = qho_factored_evolution(m, tau, 1.0).unwrap();
            let low = (m / 8).max(1);
            let q = crate::operators::qht(m, low - 1).unwrap();
            let cols = q.matrix.slice(ndarray::s![.., ..low]).to_owned();
            let err = spectral_norm(&(&approx.matrix - &exact.matrix).dot(&cols));
            assert!(err < prev, "M={m}: {err} !< {prev}");
            prev = err;
        }
    }

    #[test]
    fn h0_fastforward_sector_phase() {
        // n = 2 sector at τ = 1, U = 2, μ = 0.5, g = ω₀ = 1:
        // diagonal value U/4 − 2μ − ω₀ = −1.5, phase e^{+1.5i}.
        let p = HubbardHolsteinParams {
            n_sites: 1,
            g: 1.0,
            omega0: 1.0,
            u: 2.0,
            mu: 0.5,
            cutoff: 16,
            quantisation: Quantisation::FirstQ,
            boundary: BoundaryCondition::Open,
            max_dim: None,
        };
        let vals = hh_transformed_fermion_diag(&p);
        assert!((vals[3] + 1.5).abs() < 1e-14);
        let u = h0_fastforward_hh(&p, 1.0, 1e-8).unwrap();
        assert!(u.unitarity_defect() < 1e-12);
        let u0 = h0_fastforward_hh(&p, 0.0, 1e-8).unwrap();
        assert!(max_abs_diff(&u0.matrix, &identity(64)) < 1e-14);
        // Ratio of the fermionic phases between the n=2 and n=1 sectors
        // isolates e^{−i(−1.5−(−0.75))} ... check against the exact H̃₀.
        let h0 = transformed_h0_hh(&p).unwrap();
        let exact = exact_evolution(&h0, 1.0).unwrap();
        let m = 16;
        let low = 3;
        let q1 = crate::operators::qht(m, low - 1).unwrap();
        let cols = q1.matrix.slice(ndarray::s![.., ..low]).to_owned();
        let q = crate::linalg::kron(&identity(4), &cols);
        let err = spectral_norm(&(&u.matrix - &exact.matrix).dot(&q));
        assert!(err < 1e-5, "low-span deviation {err}");
    }

    #[test]
    fn h0_fastforward_error_decreases() {
        let mut prev = f64::INFINITY;
        for m in [16usize, 32, 64] {
            let p = hh_params(1, 1.0, m, Quantisation::FirstQ);
            let u = h0_fastforward_hh(&p, 0.4, 1e-10).unwrap();
            let h0 = transformed_h0_hh(&p).unwrap();
            let exact = exact_evolution(&h0, 0.4).unwrap();
            let low = (m / 8).max(1);
            let qcols = crate::operators::qht(m, low - 1).unwrap();
            let cols = qcols.matrix.slice(ndarray::s![.., ..low]).to_owned();
            let q = crate::linalg::kron(&identity(4), &cols);
            let err = spectral_norm(&(&u.matrix - &exact.matrix).dot(&q));
            assert!(err < prev, "M={m}: {err} !< {prev}");
            prev = err;
        }
    }

    #[test]
    fn plan_formula_instances() {
        let plan = dyson_truncation_params(1.0, 1e-2, 2.0, 10.0).unwrap();
        assert_eq!(plan.r, 3); // ⌈2/0.7⌉
        let single = dyson_truncation_params(0.7, 1e-2, 1.0, 10.0).unwrap();
        assert_eq!(single.r, 1);
        // K grows slowly and monotonically as ε tightens.
        let mut prev_k = 0;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let p = dyson_truncation_params(1.0, eps, 2.0, 10.0).unwrap();
            assert!(p.k >= prev_k);
            assert!(p.k <= prev_k + 4);
            prev_k = p.k;
        }
        assert!(dyson_truncation_params(0.0, 1e-2, 1.0, 1.0).is_err());
    }

    #[test]
    fn dyson_segment_trivial_cases() {
        let p = hh_params(2, 0.5, 3, Quantisation::SecondQ);
        let frame = hh_interaction_frame(&p).unwrap();
        let dim = frame.v_tilde.nrows();
        let layout = p.layout().unwrap();
        let evo = |_s: f64| identity(dim);
        // V = 0 → identity for any K, L.
        let zero_v = Operator::new(CMat::zeros((dim, dim)), layout.clone(), false).unwrap();
        let seg = dyson_segment(&evo, &zero_v, 0.2, 3, 4).unwrap();
        assert!(max_abs_diff(&seg.matrix, &identity(dim)) < 1e-14);
        // K = 0 → identity.
        let v = Operator::new(frame.v_tilde.clone(), layout, false).unwrap();
        let seg0 = dyson_segment(&evo, &v, 0.2, 0, 4).unwrap();
        assert!(max_abs_diff(&seg0.matrix, &identity(dim)) < 1e-14);
        assert!(dyson_segment(&evo, &v, 0.2, 40, 1_000_000_000).is_err());
    }

    #[test]
    fn dyson_segment_matches_spectral_path() {
        let p = hh_params(2, 0.5, 3, Quantisation::SecondQ);
        let frame = hh_interaction_frame(&p).unwrap();
        let layout = p.layout().unwrap();
        let h0 = transformed_h0_hh(&p).unwrap();
        let evo = move |s: f64| crate::linalg::expi_hermitian(&h0.matrix, s);
        let v = Operator::new(frame.v_tilde.clone(), layout, false).unwrap();
        let (k, l, dt) = (3usize, 5usize, 0.2);
        let direct = dyson_segment(&evo, &v, dt, k, l).unwrap();
        let fast = dyson_segment_spectral(&frame.h0_eigvals, &frame.v_eig, dt, k, l).unwrap();
        assert!(max_abs_diff(&direct.matrix, &fast) < 1e-11);
    }

    #[test]
    fn dyson_segment_error_monotone_in_k_and_l() {
        let p = hh_params(2, 0.5, 3, Quantisation::SecondQ);
        let frame = hh_interaction_frame(&p).unwrap();
        let dt = 0.2;
        let oracle = oracles::time_ordered_propagator(&frame.h0_eigvals, &frame.v_eig, dt, 1000);
        let err = |k: usize, l: usize| -> f64 {
            let seg = dyson_segment_spectral(&frame.h0_eigvals, &frame.v_eig, dt, k, l).unwrap();
            spectral_norm(&(&seg - &oracle))
        };
        let mut prev = f64::INFINITY;
        for k in [1usize, 2, 3, 4] {
            let e = err(k, 16);
            assert!(e <= prev * (1.0 + 1e-9), "K={k}: {e} !<= {prev}");
            prev = e;
        }
        let mut prev = f64::INFINITY;
        for l in [4usize, 8, 16, 32] {
            let e = err(4, l);
            assert!(e <= prev * (1.0 + 1e-9), "L={l}: {e} !<= {prev}");
            prev = e;
        }
    }

    #[test]
    fn interaction_picture_end_to_end() {
        let p = hh_params(2, 0.5, 3, Quantisation::SecondQ);
        let eps = 1e-2;
        let (u, plan) = interaction_picture_evolution_with_plan(&p, 1.0, eps).unwrap();
        plan.validate().unwrap();
        let err = propagator_error(&p, &u, 1.0).unwrap();
        assert!(err <= eps, "error {err} > {eps}");
        // Near-unitarity tracks the truncation error.
        assert!(unitarity_defect(&u.matrix) < 2.0 * eps);

        let u0 = interaction_picture_evolution(&p, 0.0, eps).unwrap();
        assert!(max_abs_diff(&u0.matrix, &identity(u0.dim())) < 1e-13);
    }

    #[test]
    fn interaction_picture_reduces_at_zero_coupling() {
        let p = hh_params(2, 0.0, 3, Quantisation::SecondQ);
        let eps = 1e-2;
        let u = interaction_picture_evolution(&p, 1.0, eps).unwrap();
        let err = propagator_error(&p, &u, 1.0).unwrap();
        assert!(err <= eps, "error {err}");
    }

    #[test]
    fn pushing_identity_holds() {
        let p = hh_params(1, 0.6, 8, Quantisation::SecondQ);
        let layout = p.layout().unwrap();
        let dim = layout.total_dim();
        // O = n̂₁ on the full space.
        let n1 = embed(
            &layout,
            Some(&crate::models::site_number_op(1, 0)),
            &[],
        );
        let o = Operator::new(n1, layout.clone(), true).unwrap();
        let mut state: CVec = (0..dim)
            .map(|i| C64::new((0.3 * i as f64).cos(), (0.17 * i as f64).sin()))
            .collect::<Vec<_>>()
            .into();
        let nrm = state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        state.mapv_inplace(|z| z / nrm);
        let (lhs, rhs) = expectation_pushing_check(&p, 0.9, &state, &o).unwrap();
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        let id = Operator::new(identity(dim), layout, true).unwrap();
        let (l1, r1) = expectation_pushing_check(&p, 0.9, &state, &id).unwrap();
        assert!((l1 - 1.0).abs() < 1e-10 && (r1 - 1.0).abs() < 1e-10);
        let (l2, r2) = expectation_pushing_check(&p, 0.0, &state, &o).unwrap();
        assert!((l2 - r2).abs() < 1e-12);
    }
}
