//! Polaron transforms and the diagonalisation identities they certify.
//!
//! Each transform is a fermion-occupation-controlled bosonic displacement:
//! block-diagonal over fermionic configurations, displacing every bosonic
//! register by an amplitude read off the configuration. Conjugating
//! `H_b + H_fb` removes the linear coupling, leaving a harmonic oscillator
//! plus a fermion-diagonal shift; the residual functions measure how well
//! that identity survives the finite cutoff.

use crate::linalg::{
    dagger, diag_real, eigh, exp_antihermitian, identity, kron, kron_all, log_unitary, sandwich,
    spectral_norm, CMat, C64,
};
use crate::models::{
    bonds, collective_spin, hopping_sum_matrix, mode_index, mode_occupation, DickeParams,
    FrohlichParams, HubbardHolsteinParams, SSHParams,
};
use crate::operators::{
    coupling_quadrature, displacement_1q, displacement_for, embed, jw_fermion_ops, pauli_x, qht,
    single_mode_hb, Operator, OperatorError, Quantisation, RegisterLayout,
};
use std::collections::BTreeMap;

/// A polaron transform: the unitary plus the displacement table it was
/// built from. Keys are fermionic occupation patterns; values are the
/// displacement amplitudes per bosonic register, in the convention of the
/// layout's quantisation (position shift in FirstQ, `b`-shift in SecondQ).
#[derive(Debug, Clone)]
pub struct PolaronTransform {
    pub unitary: Operator,
    pub alpha_table: BTreeMap<Vec<u8>, Vec<f64>>,
    pub model_tag: String,
}

/// Displacement amplitude for a Hubbard-Holstein site occupation.
pub fn hh_alpha(
    n: u8,
    g: f64,
    omega0: f64,
    quantisation: Quantisation,
) -> Result<f64, OperatorError> {
    if n > 2 {
        return Err(OperatorError::Invalid(format!(
            "occupation must be 0, 1 or 2, got {n}"
        )));
    }
    if omega0 <= 0.0 {
        return Err(OperatorError::Invalid("ω₀ > 0 required".into()));
    }
    let base = (n as f64 - 1.0) * g / omega0;
    Ok(match quantisation {
        Quantisation::FirstQ => (2.0_f64).sqrt() * base,
        Quantisation::SecondQ => base,
    })
}

/// Per-site fermionic occupations (0, 1 or 2) of a fermion basis index.
pub fn occupation_pattern(f: usize, n_sites: usize) -> Vec<u8> {
    let num_modes = 2 * n_sites;
    (0..n_sites)
        .map(|i| {
            (mode_occupation(f, mode_index(i, 0), num_modes)
                + mode_occupation(f, mode_index(i, 1), num_modes)) as u8
        })
        .collect()
}

/// Assemble a fermion-config-controlled product of per-register boson
/// displacements into the full-space unitary.
fn assemble_controlled_displacements(
    layout: &RegisterLayout,
    alphas: impl Fn(usize) -> Vec<f64>,
) -> Result<(CMat, BTreeMap<Vec<u8>, Vec<f64>>), OperatorError> {
    let fdim = layout.fermion_dim();
    let bdim = layout.boson_dim;
    let btot = layout.boson_total_dim();
    let dim = layout.total_dim();
    let mut u = CMat::zeros((dim, dim));
    let mut table = BTreeMap::new();
    let mut cache: BTreeMap<i64, CMat> = BTreeMap::new();
    let quantise = |a: f64| (a * 1e12).round() as i64;
    for f in 0..fdim {
        let avec = alphas(f);
        let mut factors: Vec<CMat> = Vec::with_capacity(avec.len());
        for &a in &avec {
            let key = quantise(a);
            let d = cache
                .entry(key)
                .or_insert_with(|| displacement_for(bdim, layout.quantisation, a).expect("displacement"));
            factors.push(d.clone());
        }
        let refs: Vec<&CMat> = factors.iter().collect();
        let block = if refs.is_empty() {
            identity(btot)
        } else {
            kron_all(&refs)
        };
        for r in 0..btot {
            for c in 0..btot {
                u[(f * btot + r, f * btot + c)] = block[(r, c)];
            }
        }
        if layout.fermion_modes_per_site == 2 {
            table.insert(occupation_pattern(f, layout.num_sites), avec);
        } else {
            let bits: Vec<u8> = (0..layout.num_fermion_modes())
                .map(|k| mode_occupation(f, k, layout.num_fermion_modes()) as u8)
                .collect();
            table.insert(bits, avec);
        }
    }
    Ok((u, table))
}

/// Lang-Firsov transform for the Hubbard-Holstein model.
pub fn build_polaron_hh(p: &HubbardHolsteinParams) -> Result<PolaronTransform, OperatorError> {
    let layout = p.layout()?;
    let n = p.n_sites;
    let (g, w) = (p.g, p.omega0);
    let q = p.quantisation;
    let (u, table) = assemble_controlled_displacements(&layout, |f| {
        occupation_pattern(f, n)
            .into_iter()
            .map(|occ| hh_alpha(occ, g, w, q).expect("occupation in range"))
            .collect()
    })?;
    Ok(PolaronTransform {
        unitary: Operator::new(u, layout, false)?,
        alpha_table: table,
        model_tag: "hubbard_holstein".into(),
    })
}

/// Dicke transform `exp[(g/ω₀)(b†−b) ⊗ S_x]`.
pub fn build_polaron_dicke(p: &DickeParams) -> Result<PolaronTransform, OperatorError> {
    let layout = p.layout()?;
    let bdim = layout.boson_dim;
    let (b, bdag) = crate::operators::ladder_ops(bdim - 1)?;
    let gen_boson = &bdag.matrix - &b.matrix;
    let sx = collective_spin(p.n_atoms, &pauli_x());
    let gen = kron(&sx, &gen_boson).mapv(|z| z * (p.g / p.omega0));
    let u = exp_antihermitian(&gen);
    // The table records the displacement per S_x eigenvalue pattern
    // (spins along x, encoded 0 ↦ +1, 1 ↦ −1).
    let mut table = BTreeMap::new();
    for bits in 0..(1usize << p.n_atoms) {
        let pattern: Vec<u8> = (0..p.n_atoms)
            .map(|j| ((bits >> (p.n_atoms - 1 - j)) & 1) as u8)
            .collect();
        let sigma: f64 = pattern
            .iter()
            .map(|&s| if s == 0 { 1.0 } else { -1.0 })
            .sum();
        table.insert(pattern, vec![p.g / p.omega0 * sigma]);
    }
    Ok(PolaronTransform {
        unitary: Operator::new(u, layout, false)?,
        alpha_table: table,
        model_tag: "dicke".into(),
    })
}

/// Hubbard-Fröhlich displacement amplitude
/// `α_{i,γ} = Σ_j f_{i,j,γ}(n_j − 1)/ω_{i,γ}` for a fermion configuration.
pub fn frohlich_alpha(p: &FrohlichParams, config: &[u8], site: usize, gamma: usize) -> f64 {
    let mut num = 0.0;
    for (j, &nj) in config.iter().enumerate() {
        num += p.f(site, j, gamma) * (nj as f64 - 1.0);
    }
    num / p.omegas[site * p.modes_per_site + gamma]
}

pub fn build_polaron_frohlich(p: &FrohlichParams) -> Result<PolaronTransform, OperatorError> {
    let layout = p.layout()?;
    let n = p.n_sites;
    let modes = p.modes_per_site;
    let q = p.quantisation;
    let pp = p.clone();
    let (u, table) = assemble_controlled_displacements(&layout, move |f| {
        let config = occupation_pattern(f, n);
        let mut avec = Vec::with_capacity(n * modes);
        for i in 0..n {
            for gamma in 0..modes {
                let a2q = frohlich_alpha(&pp, &config, i, gamma);
                avec.push(match q {
                    Quantisation::SecondQ => a2q,
                    Quantisation::FirstQ => (2.0_f64).sqrt() * a2q,
                });
            }
        }
        avec
    })?;
    Ok(PolaronTransform {
        unitary: Operator::new(u, layout, false)?,
        alpha_table: table,
        model_tag: "hubbard_frohlich".into(),
    })
}

/// SSH transforms: the Fock-space Fourier rotation `S` (per spin) and the
/// boson displacement controlled on the momentum-occupation weights read
/// off numerically from `S†(Σ hop)S`.
pub fn build_ssh_transforms(
    p: &SSHParams,
) -> Result<(Operator, PolaronTransform), OperatorError> {
    let layout = p.layout()?;
    let n = p.n_sites;
    let fdim = layout.fermion_dim();

    // Single-particle DFT lifted to Fock space through its generator.
    let s_fock = if n == 1 {
        identity(fdim)
    } else {
        let mut u1 = CMat::zeros((n, n));
        for qi in 0..n {
            for xi in 0..n {
                let phase = 2.0 * std::f64::consts::PI * (qi * xi) as f64 / n as f64;
                u1[(qi, xi)] = C64::new(phase.cos(), phase.sin()) / (n as f64).sqrt();
            }
        }
        let a1 = log_unitary(&u1);
        let c = jw_fermion_ops(2 * n)?;
        let mut gen = CMat::zeros((fdim, fdim));
        for spin in 0..2 {
            for j in 0..n {
                for k in 0..n {
                    let z = a1[(j, k)];
                    if z.norm() < 1e-15 {
                        continue;
                    }
                    let term = dagger(&c[mode_index(j, spin)].matrix)
                        .dot(&c[mode_index(k, spin)].matrix);
                    gen = gen + &term.mapv(|v| v * z);
                }
            }
        }
        exp_antihermitian(&gen)
    };

    // Diagonal weights of the rotated hopping sum.
    let hop = hopping_sum_matrix(n, p.boundary)?;
    let rotated = sandwich(&dagger(&s_fock), &hop);
    let weights: Vec<f64> = (0..fdim).map(|f| rotated[(f, f)].re).collect();

    let (u, mut table) = assemble_controlled_displacements(&layout, |f| {
        vec![p.g * weights[f] / p.omega0]
    })?;
    // Re-key the table by mode occupation bits in the rotated basis.
    table.clear();
    for (f, &w) in weights.iter().enumerate() {
        let bits: Vec<u8> = (0..2 * n)
            .map(|k| mode_occupation(f, k, 2 * n) as u8)
            .collect();
        table.insert(bits, vec![p.g * w / p.omega0]);
    }

    let s_full = embed(&layout, Some(&s_fock), &[]);
    Ok((
        Operator::new(s_full, layout.clone(), false)?,
        PolaronTransform {
            unitary: Operator::new(u, layout, false)?,
            alpha_table: table,
            model_tag: "ssh_single_mode".into(),
        },
    ))
}

/// `U·A·U†`.
pub fn conjugate(a: &Operator, u: &Operator) -> Result<Operator, OperatorError> {
    if a.dim() != u.dim() {
        return Err(OperatorError::DimensionMismatch(format!(
            "operator dim {} vs unitary dim {}",
            a.dim(),
            u.dim()
        )));
    }
    Ok(Operator {
        matrix: sandwich(&u.matrix, &a.matrix),
        layout: a.layout.clone(),
        hermitian_hint: false,
    })
}

/// Fermion-diagonal values of `H̃^diag_f = H^diag_f + H'^diag_f` over the
/// fermion basis: onsite interaction, chemical potential, and the polaron
/// shift `−(ω₀/2)|α_{n_i}|²` (FirstQ) / `−ω₀|α_{n_i}|²` (SecondQ).
pub fn hh_transformed_fermion_diag(p: &HubbardHolsteinParams) -> Vec<f64> {
    let n = p.n_sites;
    let fdim = 1usize << (2 * n);
    (0..fdim)
        .map(|f| {
            let mut val = 0.0;
            let num_modes = 2 * n;
            for i in 0..n {
                let nu = mode_occupation(f, mode_index(i, 0), num_modes) as f64;
                let nd = mode_occupation(f, mode_index(i, 1), num_modes) as f64;
                val += p.u * (nu - 0.5) * (nd - 0.5) - p.mu * (nu + nd);
                let occ = (nu + nd) as u8;
                let alpha = hh_alpha(occ, p.g, p.omega0, p.quantisation).expect("occ in range");
                val += match p.quantisation {
                    Quantisation::FirstQ => -0.5 * p.omega0 * alpha * alpha,
                    Quantisation::SecondQ => -p.omega0 * alpha * alpha,
                };
            }
            val
        })
        .collect()
}

/// `H̃₀ = H_b + H'^diag_f + H^diag_f` on the full layout.
pub fn transformed_h0_hh(p: &HubbardHolsteinParams) -> Result<Operator, OperatorError> {
    let layout = p.layout()?;
    let bdim = layout.boson_dim;
    let dim = layout.total_dim();
    let hb_site = single_mode_hb(bdim, p.quantisation, p.omega0);
    let mut h = CMat::zeros((dim, dim));
    for i in 0..p.n_sites {
        h = h + &embed(&layout, None, &[(i, &hb_site)]);
    }
    let diag = hh_transformed_fermion_diag(p);
    let fd = diag_real(&diag);
    h = h + &embed(&layout, Some(&fd), &[]);
    Operator::new(h, layout, true)
}

/// Polaron-transformed hopping
/// `Ṽ = −Σ_{⟨i,j⟩,σ} c†_{i,σ}c_{j,σ} e^{−ig√2(P_i−P_j)/ω₀} + h.c.`
/// (FirstQ only; in SecondQ conjugate `H^hop_f` by the transform instead).
pub fn transformed_v_hh(p: &HubbardHolsteinParams) -> Result<Operator, OperatorError> {
    if p.quantisation != Quantisation::FirstQ {
        return Err(OperatorError::Invalid(
            "transformed_v_hh is first-quantised; use conjugate(H_f_hop, D) in SecondQ".into(),
        ));
    }
    let layout = p.layout()?;
    let m = layout.boson_dim;
    let delta = hh_alpha(2, p.g, p.omega0, Quantisation::FirstQ)?; // √2 g/ω₀
    let d_plus = displacement_1q(m, delta)?.matrix; // e^{−iδP}
    let d_minus = displacement_1q(m, -delta)?.matrix; // e^{+iδP}
    let c = jw_fermion_ops(2 * p.n_sites)?;
    let dim = layout.total_dim();
    let mut v = CMat::zeros((dim, dim));
    for (i, j) in bonds(p.n_sites, p.boundary) {
        for spin in 0..2 {
            let hop_dir = dagger(&c[mode_index(i, spin)].matrix)
                .dot(&c[mode_index(j, spin)].matrix);
            let term = embed(&layout, Some(&hop_dir), &[(i, &d_plus), (j, &d_minus)]);
            v = v - &term - &dagger(&term);
        }
    }
    Operator::new(v, layout, true)
}

fn low_projector_columns(
    bdim: usize,
    quantisation: Quantisation,
    low: usize,
) -> Result<CMat, OperatorError> {
    match quantisation {
        Quantisation::SecondQ => {
            let mut q = CMat::zeros((bdim, low));
            for k in 0..low {
                q[(k, k)] = C64::new(1.0, 0.0);
            }
            Ok(q)
        }
        Quantisation::FirstQ => {
            let u = qht(bdim, low.saturating_sub(1))?;
            Ok(u.matrix.slice(ndarray::s![.., ..low]).to_owned())
        }
    }
}

/// Per-configuration residual of the diagonalisation identity for models
/// whose transformed blocks factor over bosonic registers. `terms` yields,
/// per register, the displaced boson Hamiltonian ingredients
/// `(coupling, omega, alpha_2q)` meaning `H = ω b†b + coupling·quad`
/// displaced by `alpha` with target `ω b†b − ω α²`.
fn factored_residual(
    bdim: usize,
    quantisation: Quantisation,
    low: usize,
    regs: &[(f64, f64, f64)],
) -> Result<f64, OperatorError> {
    let q = low_projector_columns(bdim, quantisation, low)?;
    let quad = coupling_quadrature(bdim, quantisation);
    let mut reg_mats: Vec<CMat> = Vec::with_capacity(regs.len());
    let mut shift_total = 0.0;
    for &(coupling, omega, alpha2q) in regs {
        let hb = single_mode_hb(bdim, quantisation, omega);
        let a = &hb + &quad.mapv(|z| z * coupling);
        let alpha_disp = match quantisation {
            Quantisation::FirstQ => (2.0_f64).sqrt() * alpha2q,
            Quantisation::SecondQ => alpha2q,
        };
        let d = displacement_for(bdim, quantisation, alpha_disp)?;
        let transformed = sandwich(&d, &a);
        let shift = -omega * alpha2q * alpha2q;
        shift_total += shift;
        let diff = &transformed - &hb;
        reg_mats.push(sandwich(&dagger(&q), &diff));
    }
    // Assemble Σ_i (I ⊗ … ⊗ R_i ⊗ … ⊗ I) − shift·I on the projected space.
    let nlow = low.pow(regs.len() as u32);
    let mut r = CMat::zeros((nlow, nlow));
    let id_low = identity(low);
    for (i, m) in reg_mats.iter().enumerate() {
        let mut factors: Vec<&CMat> = vec![&id_low; regs.len()];
        factors[i] = m;
        r = r + &kron_all(&factors);
    }
    for d in 0..nlow {
        r[(d, d)] -= C64::new(shift_total, 0.0);
    }
    Ok(spectral_norm(&r))
}

/// `‖P_low(𝒟(H_b+H_fb)𝒟† − (H_b + H'^diag_f))P_low‖₂` for Hubbard-Holstein.
pub fn diagonalization_residual(
    p: &HubbardHolsteinParams,
    low_fraction: f64,
) -> Result<f64, OperatorError> {
    if !(low_fraction > 0.0 && low_fraction <= 0.25) {
        return Err(OperatorError::Invalid("low_fraction ∈ (0, 1/4]".into()));
    }
    let layout = p.layout()?;
    let bdim = layout.boson_dim;
    let low = ((low_fraction * bdim as f64).floor() as usize).max(1);
    let mut worst = 0.0_f64;
    for pattern in occupation_patterns(p.n_sites) {
        let regs: Vec<(f64, f64, f64)> = pattern
            .iter()
            .map(|&occ| {
                let coupling = p.g * (occ as f64 - 1.0);
                let alpha2q = hh_alpha(occ, p.g, p.omega0, Quantisation::SecondQ).unwrap();
                (coupling, p.omega0, alpha2q)
            })
            .collect();
        worst = worst.max(factored_residual(bdim, p.quantisation, low, &regs)?);
    }
    Ok(worst)
}

/// All distinct per-site occupation patterns.
fn occupation_patterns(n_sites: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    for _ in 0..n_sites {
        let mut next = Vec::new();
        for p in &out {
            for occ in 0..=2u8 {
                let mut q = p.clone();
                q.push(occ);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Fröhlich residual with the same projected norm as the Hubbard-Holstein
/// case, maximised over fermionic configurations.
pub fn frohlich_residual(p: &FrohlichParams, low_fraction: f64) -> Result<f64, OperatorError> {
    if !(low_fraction > 0.0 && low_fraction <= 0.25) {
        return Err(OperatorError::Invalid("low_fraction ∈ (0, 1/4]".into()));
    }
    p.layout()?;
    let bdim = p.boson_dim();
    let low = ((low_fraction * bdim as f64).floor() as usize).max(1);
    let mut worst = 0.0_f64;
    for config in occupation_patterns(p.n_sites) {
        let mut regs = Vec::new();
        for i in 0..p.n_sites {
            for gamma in 0..p.modes_per_site {
                let omega = p.omegas[i * p.modes_per_site + gamma];
                let coupling: f64 = config
                    .iter()
                    .enumerate()
                    .map(|(j, &nj)| p.f(i, j, gamma) * (nj as f64 - 1.0))
                    .sum();
                let alpha2q = coupling / omega;
                regs.push((coupling, omega, alpha2q));
            }
        }
        worst = worst.max(factored_residual(bdim, p.quantisation, low, &regs)?);
    }
    Ok(worst)
}

/// Dicke residual
/// `‖P(𝒟(ω₀b†b + g(b+b†)S_x)𝒟† − (ω₀b†b − (g²/ω₀)S_x²))P‖₂`,
/// evaluated per S_x eigenvalue sector.
pub fn dicke_residual(p: &DickeParams, low_fraction: f64) -> Result<f64, OperatorError> {
    if !(low_fraction > 0.0 && low_fraction <= 0.25) {
        return Err(OperatorError::Invalid("low_fraction ∈ (0, 1/4]".into()));
    }
    p.layout()?;
    let bdim = p.lambda + 1;
    let low = ((low_fraction * bdim as f64).floor() as usize).max(1);
    let mut worst = 0.0_f64;
    // S_x eigenvalues are Σ ±1 over atoms.
    for bits in 0..(1usize << p.n_atoms) {
        let sigma: f64 = (0..p.n_atoms)
            .map(|j| if (bits >> j) & 1 == 0 { 1.0 } else { -1.0 })
            .sum();
        let coupling = p.g * sigma;
        let alpha2q = coupling / p.omega0;
        worst = worst.max(factored_residual(
            bdim,
            Quantisation::SecondQ,
            low,
            &[(coupling, p.omega0, alpha2q)],
        )?);
    }
    Ok(worst)
}

/// SSH residual after conjugating by `S ⊗ I` then by `𝒟`, against the
/// diagonal target `ω₀b†b − (g²/ω₀)T̃²`; includes the off-diagonal dust of
/// the rotated hopping.
pub fn ssh_residual(p: &SSHParams, low_fraction: f64) -> Result<f64, OperatorError> {
    if !(low_fraction > 0.0 && low_fraction <= 0.25) {
        return Err(OperatorError::Invalid("low_fraction ∈ (0, 1/4]".into()));
    }
    let layout = p.layout()?;
    let bdim = layout.boson_dim;
    let low = ((low_fraction * bdim as f64).floor() as usize).max(1);
    let (s, d) = build_ssh_transforms(p)?;
    let ops = crate::models::ssh_hamiltonian_single_mode(p)?;
    let h0 = &ops.h_b.matrix + &ops.h_fb.matrix;
    let rotated = sandwich(&dagger(&s.matrix), &h0);
    let transformed = sandwich(&d.unitary.matrix, &rotated);

    let hop = hopping_sum_matrix(p.n_sites, p.boundary)?;
    let t_rot = sandwich(&dagger(&embed_fermion_only(p)?), &hop);
    let fdim = layout.fermion_dim();
    let hb = single_mode_hb(bdim, Quantisation::SecondQ, p.omega0);
    let mut target = CMat::zeros((layout.total_dim(), layout.total_dim()));
    for f in 0..fdim {
        let lam = t_rot[(f, f)].re;
        let shift = -p.g * p.g * lam * lam / p.omega0;
        for r in 0..bdim {
            for c in 0..bdim {
                let mut val = hb[(r, c)];
                if r == c {
                    val += C64::new(shift, 0.0);
                }
                target[(f * bdim + r, f * bdim + c)] = val;
            }
        }
    }
    let diff = &transformed - &target;
    let q_low = low_projector_columns(bdim, Quantisation::SecondQ, low)?;
    let q_full = kron(&identity(fdim), &q_low);
    Ok(spectral_norm(&sandwich(&dagger(&q_full), &diff)))
}

fn embed_fermion_only(p: &SSHParams) -> Result<CMat, OperatorError> {
    let (s, _) = build_ssh_transforms(p)?;
    let layout = p.layout()?;
    let fdim = layout.fermion_dim();
    let bdim = layout.boson_dim;
    // Extract the fermionic factor of S (it is I on the boson register).
    let mut sf = CMat::zeros((fdim, fdim));
    for r in 0..fdim {
        for c in 0..fdim {
            sf[(r, c)] = s.matrix[(r * bdim, c * bdim)];
        }
    }
    Ok(sf)
}

/// Lowest eigenvalues of `H_b + H_fb` restricted to one fermion sector,
/// against the displaced-oscillator target `ω₀m − g²/ω₀`.
pub fn displaced_spectrum_deviation(
    lambda: usize,
    g: f64,
    omega0: f64,
    occupation: u8,
    levels: usize,
) -> Result<f64, OperatorError> {
    let bdim = lambda + 1;
    let hb = single_mode_hb(bdim, Quantisation::SecondQ, omega0);
    let quad = coupling_quadrature(bdim, Quantisation::SecondQ);
    let coupling = g * (occupation as f64 - 1.0);
    let h = &hb + &quad.mapv(|z| z * coupling);
    let (vals, _) = eigh(&h);
    let shift = -coupling * coupling / omega0;
    let mut worst = 0.0_f64;
    for m in 0..levels {
        let target = omega0 * m as f64 + shift;
        worst = worst.max((vals[m] - target).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, max_abs, max_abs_diff};
    use crate::models::{hh_hamiltonian, BoundaryCondition, FrohlichCoupling};
    use crate::operators::pauli_x;

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
            mu: 0.3,
            cutoff,
            quantisation,
            boundary: BoundaryCondition::Open,
            max_dim: None,
        }
    }

    #[test]
    fn hh_alpha_table_values() {
        assert_eq!(hh_alpha(1, 3.7, 2.2, Quantisation::FirstQ).unwrap(), 0.0);
        let v = hh_alpha(2, 1.0, 2.0, Quantisation::FirstQ).unwrap();
        assert!((v - (2.0_f64).sqrt() / 2.0).abs() < 1e-15);
        let w = hh_alpha(0, 3.0, 1.0, Quantisation::SecondQ).unwrap();
        assert!((w + 3.0).abs() < 1e-15);
        assert!(hh_alpha(3, 1.0, 1.0, Quantisation::SecondQ).is_err());
    }

    #[test]
    fn polaron_hh_zero_coupling_is_identity() {
        let d = build_polaron_hh(&hh_params(1, 0.0, 4, Quantisation::FirstQ)).unwrap();
        assert!(max_abs_diff(&d.unitary.matrix, &identity(16)) < 1e-13);
    }

    #[test]
    fn polaron_hh_half_filling_sector_identity() {
        let p = hh_params(1, 0.8, 5, Quantisation::SecondQ);
        let d = build_polaron_hh(&p).unwrap();
        let bdim = 6;
        // Fermion basis indices 1 (01) and 2 (10) have n = 1.
        for f in [1usize, 2] {
            for r in 0..bdim {
                for c in 0..bdim {
                    let v = d.unitary.matrix[(f * bdim + r, f * bdim + c)];
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert!((v - C64::new(expect, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn polaron_hh_blocks_factor_over_sites() {
        let p = hh_params(2, 0.6, 8, Quantisation::FirstQ);
        let d = build_polaron_hh(&p).unwrap();
        let bdim = 8usize;
        let btot = 64usize;
        for f in 0..16usize {
            let pattern = occupation_pattern(f, 2);
            let d1 = displacement_1q(
                bdim,
                hh_alpha(pattern[0], 0.6, 1.0, Quantisation::FirstQ).unwrap(),
            )
            .unwrap()
            .matrix;
            let d2 = displacement_1q(
                bdim,
                hh_alpha(pattern[1], 0.6, 1.0, Quantisation::FirstQ).unwrap(),
            )
            .unwrap()
            .matrix;
            let expect = kron(&d1, &d2);
            for r in 0..btot {
                for c in 0..btot {
                    let v = d.unitary.matrix[(f * btot + r, f * btot + c)];
                    assert!((v - expect[(r, c)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn polaron_commutes_with_occupations() {
        let p = hh_params(2, 0.6, 3, Quantisation::SecondQ);
        let d = build_polaron_hh(&p).unwrap();
        let layout = p.layout().unwrap();
        for i in 0..2 {
            let n_i = embed(
                &layout,
                Some(&crate::models::site_number_op(2, i)),
                &[],
            );
            assert!(max_abs(&commutator(&d.unitary.matrix, &n_i)) < 1e-12);
        }
        assert!(d.unitary.unitarity_defect() < 1e-12);
    }

    #[test]
    fn dicke_transform_properties() {
        let p = DickeParams {
            n_atoms: 1,
            omega0: 1.0,
            omega_atom: 0.5,
            g: 0.4,
            lambda: 12,
            max_dim: None,
        };
        let d = build_polaron_dicke(&p).unwrap();
        assert!(d.unitary.unitarity_defect() < 1e-12);
        let layout = p.layout().unwrap();
        let sx = embed(&layout, Some(&collective_spin(1, &pauli_x())), &[]);
        assert!(max_abs(&commutator(&d.unitary.matrix, &sx)) < 1e-12);

        // N=1: equals Σ_{s=±1} |s⟩⟨s| ⊗ D(s g/ω₀) in the X eigenbasis.
        let bdim = 13;
        let dplus = crate::operators::displacement_2q(12, C64::new(0.4, 0.0))
            .unwrap()
            .matrix;
        let dminus = crate::operators::displacement_2q(12, C64::new(-0.4, 0.0))
            .unwrap()
            .matrix;
        let h = 1.0 / (2.0_f64).sqrt();
        let mut expect = CMat::zeros((2 * bdim, 2 * bdim));
        for (s, dmat) in [(0usize, &dplus), (1usize, &dminus)] {
            // |±⟩ = (|0⟩ ± |1⟩)/√2
            let amp = |i: usize| if s == 0 || i == 0 { h } else { -h };
            for qi in 0..2 {
                for qj in 0..2 {
                    let w = amp(qi) * amp(qj);
                    for r in 0..bdim {
                        for c in 0..bdim {
                            expect[(qi * bdim + r, qj * bdim + c)] += dmat[(r, c)] * w;
                        }
                    }
                }
            }
        }
        assert!(max_abs_diff(&d.unitary.matrix, &expect) < 1e-10);

        let p0 = DickeParams { g: 0.0, ..p };
        let d0 = build_polaron_dicke(&p0).unwrap();
        assert!(max_abs_diff(&d0.unitary.matrix, &identity(2 * bdim)) < 1e-13);
    }

    #[test]
    fn frohlich_alpha_value_and_delta_limit() {
        let p = FrohlichParams {
            n_sites: 2,
            modes_per_site: 1,
            omegas: vec![1.5, 1.5],
            coupling: FrohlichCoupling::Kernel { kappa: 0.8 },
            u: 0.0,
            mu: 0.0,
            cutoff: 3,
            quantisation: Quantisation::SecondQ,
            max_dim: None,
        };
        let a = frohlich_alpha(&p, &[2, 0], 0, 0);
        let expect = (0.8 - 0.8 / (2.0_f64).powf(1.5)) / 1.5;
        assert!((a - expect).abs() < 1e-14);

        let hh = hh_params(2, 0.6, 3, Quantisation::SecondQ);
        let pdelta = FrohlichParams {
            n_sites: 2,
            modes_per_site: 1,
            omegas: vec![1.0, 1.0],
            coupling: FrohlichCoupling::Delta { g: 0.6 },
            u: 1.0,
            mu: 0.3,
            cutoff: 3,
            quantisation: Quantisation::SecondQ,
            max_dim: None,
        };
        let dfr = build_polaron_frohlich(&pdelta).unwrap();
        let dhh = build_polaron_hh(&hh).unwrap();
        assert!(max_abs_diff(&dfr.unitary.matrix, &dhh.unitary.matrix) < 1e-12);

        // All-half-filled configuration block is the identity.
        let f_half = 0b0110usize; // n₁ = 1, n₂ = 1
        let btot = 16;
        for r in 0..btot {
            for c in 0..btot {
                let v = dfr.unitary.matrix[(f_half * btot + r, f_half * btot + c)];
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((v - C64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ssh_transforms_structure() {
        let p = SSHParams {
            n_sites: 3,
            t_hop: 1.0,
            g: 0.4,
            omega0: 1.0,
            lambda: 2,
            boundary: BoundaryCondition::Periodic,
            max_dim: None,
        };
        let (s, d) = build_ssh_transforms(&p).unwrap();
        assert!(s.unitarity_defect() < 1e-12);
        assert!(d.unitary.unitarity_defect() < 1e-12);

        // Rotated hopping is diagonal in the momentum occupation basis.
        let hop = hopping_sum_matrix(3, BoundaryCondition::Periodic).unwrap();
        let sf = embed_fermion_only(&p).unwrap();
        let rot = sandwich(&dagger(&sf), &hop);
        let mut offdiag = 0.0_f64;
        for r in 0..rot.nrows() {
            for c in 0..rot.ncols() {
                if r != c {
                    offdiag = offdiag.max(rot[(r, c)].norm());
                }
            }
        }
        assert!(offdiag < 1e-10, "off-diagonal {offdiag}");

        let p1 = SSHParams { n_sites: 1, ..p };
        let (s1, _) = build_ssh_transforms(&p1).unwrap();
        assert!(max_abs_diff(&s1.matrix, &identity(4 * 3)) < 1e-13);
    }

    #[test]
    fn conjugate_basics() {
        let p = hh_params(1, 0.5, 3, Quantisation::SecondQ);
        let ops = hh_hamiltonian(&p).unwrap();
        let id = Operator::new(
            identity(ops.h_b.dim()),
            ops.h_b.layout.clone(),
            false,
        )
        .unwrap();
        let same = conjugate(&ops.h_b, &id).unwrap();
        assert!(max_abs_diff(&same.matrix, &ops.h_b.matrix) < 1e-15);

        let d = build_polaron_hh(&p).unwrap();
        let once = conjugate(&ops.h_fb, &d.unitary).unwrap();
        let dback = Operator {
            matrix: dagger(&d.unitary.matrix),
            layout: d.unitary.layout.clone(),
            hermitian_hint: false,
        };
        let back = conjugate(&once, &dback).unwrap();
        assert!(max_abs_diff(&back.matrix, &ops.h_fb.matrix) < 1e-12);

        let (e1, _) = eigh(&ops.h_fb.matrix);
        let herm_once = (&once.matrix + &dagger(&once.matrix)).mapv(|z| z * 0.5);
        let (e2, _) = eigh(&herm_once);
        for (a, b) in e1.iter().zip(e2.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn transformed_h0_sector_shifts() {
        let p = hh_params(1, 1.0, 8, Quantisation::SecondQ);
        let diag = hh_transformed_fermion_diag(&p);
        // n = 2 sector: U/4 − 2μ − g²/ω₀
        assert!((diag[3] - (0.25 - 0.6 - 1.0)).abs() < 1e-14);
        // n = 1 sector: −U/4 − μ, no polaron shift
        assert!((diag[1] - (-0.25 - 0.3)).abs() < 1e-14);
        let p0 = hh_params(1, 0.0, 8, Quantisation::SecondQ);
        let h0 = transformed_h0_hh(&p0).unwrap();
        let ops = hh_hamiltonian(&p0).unwrap();
        let expect = &ops.h_b.matrix + &ops.h_f_diag.matrix;
        assert!(max_abs_diff(&h0.matrix, &expect) < 1e-13);
    }

    #[test]
    fn transformed_v_reduces_and_matches_conjugation() {
        let p0 = hh_params(2, 0.0, 8, Quantisation::FirstQ);
        let v0 = transformed_v_hh(&p0).unwrap();
        let ops0 = hh_hamiltonian(&p0).unwrap();
        assert!(max_abs_diff(&v0.matrix, &ops0.h_f_hop.matrix) < 1e-13);

        let p = hh_params(2, 0.5, 8, Quantisation::FirstQ);
        let v = transformed_v_hh(&p).unwrap();
        assert!(crate::linalg::hermiticity_defect(&v.matrix) < 1e-12);
        let ops = hh_hamiltonian(&p).unwrap();
        let d = build_polaron_hh(&p).unwrap();
        let conj = conjugate(&ops.h_f_hop, &d.unitary).unwrap();
        assert!(max_abs_diff(&conj.matrix, &v.matrix) < 1e-10);
    }

    #[test]
    fn residual_vanishes_without_coupling() {
        for q in [Quantisation::FirstQ, Quantisation::SecondQ] {
            let p = hh_params(1, 0.0, 8, q);
            assert!(diagonalization_residual(&p, 0.25).unwrap() < 1e-12);
        }
    }

    #[test]
    fn residual_decreases_with_cutoff() {
        for q in [Quantisation::FirstQ, Quantisation::SecondQ] {
            let mut prev = f64::INFINITY;
            for cutoff in [8usize, 16, 32] {
                let p = hh_params(1, 1.0, cutoff, q);
                let r = diagonalization_residual(&p, 0.25).unwrap();
                assert!(r < prev, "{q:?} cutoff={cutoff}: {r} !< {prev}");
                prev = r;
            }
        }
    }

    #[test]
    fn displaced_spectrum_matches_analytic() {
        let dev = displaced_spectrum_deviation(64, 0.5, 1.0, 0, 5).unwrap();
        assert!(dev < 1e-6, "deviation {dev}");
    }

    #[test]
    fn dicke_residual_decreases() {
        let mut prev = f64::INFINITY;
        for lambda in [8usize, 16, 32] {
            let p = DickeParams {
                n_atoms: 2,
                omega0: 1.0,
                omega_atom: 0.7,
                g: 0.5,
                lambda,
                max_dim: None,
            };
            let r = dicke_residual(&p, 0.25).unwrap();
            assert!(r < prev, "Λ={lambda}: {r} !< {prev}");
            prev = r;
        }
    }

    #[test]
    fn dicke_x_sector_check() {
        // The per-sector residual construction must agree with a dense
        // conjugation by the exponential transform on a small instance.
        let p = DickeParams {
            n_atoms: 1,
            omega0: 1.0,
            omega_atom: 0.0,
            g: 0.5,
            lambda: 10,
            max_dim: None,
        };
        let ops = crate::models::dicke_hamiltonian(&p).unwrap();
        let d = build_polaron_dicke(&p).unwrap();
        let h0 = &ops.h_b.matrix + &ops.h_fb.matrix;
        let moved = sandwich(&d.unitary.matrix, &h0);
        let layout = p.layout().unwrap();
        let sx = embed(&layout, Some(&pauli_x()), &[]);
        let hbf = embed(
            &layout,
            None,
            &[(0, &single_mode_hb(11, Quantisation::SecondQ, 1.0))],
        );
        let target = &hbf - &sx.dot(&sx).mapv(|z| z * 0.25);
        // Project onto the lowest quarter of the boson register.
        let q = low_projector_columns(11, Quantisation::SecondQ, 2).unwrap();
        let qf = kron(&identity(2), &q);
        let res = spectral_norm(&sandwich(&dagger(&qf), &(&moved - &target)));
        let viaslices = dicke_residual(&p, 2.0 / 11.0).unwrap();
        assert!((res - viaslices).abs() < 1e-9, "{res} vs {viaslices}");
    }

    #[test]
    fn ssh_residual_decreases() {
        let mut prev = f64::INFINITY;
        for lambda in [8usize, 16, 32] {
            let p = SSHParams {
                n_sites: 2,
                t_hop: 1.0,
                g: 0.3,
                omega0: 1.0,
                lambda,
                boundary: BoundaryCondition::Periodic,
                max_dim: None,
            };
            let r = ssh_residual(&p, 0.25).unwrap();
            assert!(r < prev, "Λ={lambda}: {r} !< {prev}");
            prev = r;
        }
    }

    #[test]
    fn frohlich_residual_decreases() {
        let mut prev = f64::INFINITY;
        for cutoff in [8usize, 16, 32] {
            let p = FrohlichParams {
                n_sites: 2,
                modes_per_site: 1,
                omegas: vec![1.0, 1.0],
                coupling: FrohlichCoupling::Kernel { kappa: 0.7 },
                u: 0.0,
                mu: 0.0,
                cutoff,
                quantisation: Quantisation::SecondQ,
                max_dim: Some(1 << 22),
            };
            let r = frohlich_residual(&p, 0.25).unwrap();
            assert!(r < prev, "Λ={cutoff}: {r} !< {prev}");
            prev = r;
        }
    }
}
