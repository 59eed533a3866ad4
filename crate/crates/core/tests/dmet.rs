use ion_dmet::dmet::{
    build_bath, build_embedding_hamiltonian, chain_integrals, chemical_potential_loop, dmet_total_energy,
    environment_potential, exact_ground_energy, fragment_energy_from_rdms, fragment_electrons, qubit_fragment_sweep,
    solve_embedded, toy_problem, DmetConfig, DmetProblem, FragmentSweep, IntegralSet, MeanFieldReference,
};
use ion_dmet::pipeline::{bisect_delta_mu, cmd_dmet_toy};
use ion_dmet::reference::ReferenceData;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Jordan–Wigner annihilator on `n` modes as a Kronecker product: Z on lower
/// modes, |0⟩⟨1| on mode `k`, identity above.
fn ladder(k: usize, n: usize) -> DMatrix<f64> {
    let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let lower = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let id = DMatrix::identity(2, 2);
    (0..n).fold(DMatrix::identity(1, 1), |acc, j| {
        let f = if j < k { &z } else if j == k { &lower } else { &id };
        f.kronecker(&acc)
    })
}

/// Ground energy in the (n_elec, S_z = 0) sector from a Hamiltonian assembled
/// out of explicit ladder matrices, spin-orbital mode 2p + σ. Same-spin
/// excitations E_ij = a†_i a_j preserve the sector, so the two-body part is
/// ½ Σ (pq|rs) (E_px,qx E_ry,sy − δ_qx,ry E_px,sy) on sector blocks.
fn dense_fci(ints: &IntegralSet, n_elec: u32) -> f64 {
    let l = ints.n_orbitals();
    let n = 2 * l;
    let a: Vec<DMatrix<f64>> = (0..n).map(|k| ladder(k, n)).collect();
    let alpha_mask: usize = (0..l).map(|p| 1 << (2 * p)).sum();
    let keep: Vec<usize> = (0..1usize << n)
        .filter(|&k| (k as u32).count_ones() == n_elec && 2 * (k & alpha_mask).count_ones() == n_elec)
        .collect();
    let m = keep.len();
    let rows = |mat: &DMatrix<f64>| DMatrix::from_fn(m, mat.ncols(), |i, j| mat[(keep[i], j)]);
    let cols = |mat: &DMatrix<f64>| DMatrix::from_fn(mat.nrows(), m, |i, j| mat[(i, keep[j])]);
    let ad_rows: Vec<DMatrix<f64>> = a.iter().map(|x| rows(&x.transpose())).collect();
    let a_cols: Vec<DMatrix<f64>> = a.iter().map(cols).collect();
    let e = |i: usize, j: usize| &ad_rows[i] * &a_cols[j];
    let mut h = DMatrix::zeros(m, m);
    for p in 0..l {
        for q in 0..l {
            let v = ints.h[(p, q)];
            if v != 0.0 {
                for s in 0..2 {
                    h += e(2 * p + s, 2 * q + s) * v;
                }
            }
        }
    }
    for p in 0..l {
        for q in 0..l {
            for r in 0..l {
                for s in 0..l {
                    let v = ints.eri(p, q, r, s);
                    if v == 0.0 {
                        continue;
                    }
                    for x in 0..2 {
                        for y in 0..2 {
                            let (px, qx, ry, sy) = (2 * p + x, 2 * q + x, 2 * r + y, 2 * s + y);
                            let mut t = e(px, qx) * e(ry, sy);
                            if qx == ry {
                                t -= e(px, sy);
                            }
                            h += t * (0.5 * v);
                        }
                    }
                }
            }
        }
    }
    SymmetricEigen::new(h).eigenvalues.min() + ints.e_nuc
}

fn random_slater_density<R: Rng>(rng: &mut R, l: usize, n_occ: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(l, l, |_, _| rng.random_range(-1.0..1.0));
    let q = m.qr().q();
    let occ = q.columns(0, n_occ);
    occ * occ.transpose()
}

#[test]
fn two_site_bath_is_the_other_site() {
    let d = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
    let b = build_bath(&d, &[0], 1e-13).unwrap();
    assert_eq!((b.n_frag, b.n_bath, b.n_core), (1, 1, 0));
    assert!((b.singular_values[0] - 0.5).abs() < 1e-14);
    assert!((b.rotation[(1, 1)].abs() - 1.0).abs() < 1e-14);
    assert!(b.rotation[(0, 1)].abs() < 1e-14);
}

#[test]
fn bath_construction_decouples_fragment_bath_from_core_on_random_determinants() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..30 {
        let l = rng.random_range(4..9);
        let n_occ = rng.random_range(1..l);
        let d = random_slater_density(&mut rng, l, n_occ);
        let nf = rng.random_range(1..=2.min(l - 1));
        let frag: Vec<usize> = (0..nf).collect();
        let b = build_bath(&d, &frag, 1e-10).unwrap();
        let r = &b.rotation;
        assert!((r.transpose() * r - DMatrix::identity(l, l)).abs().max() < 1e-10);
        assert!(b.n_bath <= nf);
        let emb = b.embedding_orbitals();
        let d_emb = emb.transpose() * &d * &emb;
        // fragment+bath hold an integer number of electrons per spin, equal to
        // the bath size whenever every fragment direction is entangled
        let n_emb = d_emb.trace();
        assert!((n_emb - n_emb.round()).abs() < 1e-9);
        if b.n_bath == nf {
            assert!((n_emb - nf as f64).abs() < 1e-9);
        }
        // the density splits into an embedding block plus the unentangled core
        let back = &emb * d_emb * emb.transpose() + b.core_density();
        assert!((back - &d).abs().max() < 1e-9);
        let core = b.core_density();
        assert!((&core * &core - &core).abs().max() < 1e-9);
        assert!((core.trace() + n_emb - n_occ as f64).abs() < 1e-9);
    }
}

#[test]
fn bath_rejects_bad_fragments() {
    let d = DMatrix::identity(3, 3);
    assert!(build_bath(&d, &[], 1e-13).is_err());
    assert!(build_bath(&d, &[3], 1e-13).is_err());
    assert!(build_bath(&DMatrix::zeros(2, 3), &[0], 1e-13).is_err());
}

#[test]
fn environment_potential_matches_chain_closed_form() {
    let (u, v) = (2.0, 0.5);
    let ints = chain_integrals(5, 1.0, 0.3, u, v, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = random_slater_density(&mut rng, 5, 2);
    let got = environment_potential(&ints, &d);
    for p in 0..5usize {
        for q in 0..5 {
            let want = if p == q {
                let nbr: f64 = [p.wrapping_sub(1), p + 1].iter().filter(|&&n| n < 5).map(|&n| d[(n, n)]).sum();
                u * d[(p, p)] + 2.0 * v * nbr
            } else if p.abs_diff(q) == 1 {
                -v * d[(p, q)]
            } else {
                0.0
            };
            assert!((got[(p, q)] - want).abs() < 1e-12, "V[{p},{q}]");
        }
    }
}

#[test]
fn sector_diagonalization_matches_dense_fock_oracle() {
    let ints = chain_integrals(4, 1.0, 0.3, 2.0, 0.5, 0.25).unwrap();
    for n in [2usize, 4] {
        let lib = exact_ground_energy(&ints, n).unwrap();
        let oracle = dense_fci(&ints, n as u32);
        assert!((lib - oracle).abs() < 1e-10, "N = {n}: {lib} vs {oracle}");
    }
}

#[test]
fn whole_system_fragment_reproduces_exact_energy_in_zero_iterations() {
    let mut p = toy_problem().unwrap();
    p.fragments = vec![(0..4).collect()];
    let mut cfg = DmetConfig::new(4.0, 1);
    cfg.tolerance = 1e-10;
    let (res, e) = p.run(&cfg).unwrap();
    assert_eq!(res.iterations, 0);
    assert!((res.sweep.n_fragment() - 4.0).abs() < 1e-10);
    assert!((e - dense_fci(&p.ints, 4)).abs() < 1e-10);
}

#[test]
fn embedded_energy_of_the_whole_system_equals_its_eigenvalue() {
    let ints = chain_integrals(3, 1.0, 0.2, 1.5, 0.3, 0.0).unwrap();
    let emb = DMatrix::identity(3, 3);
    let h = build_embedding_hamiltonian(&ints, &DMatrix::zeros(3, 3), &emb, 3, 0.0).unwrap();
    let sol = solve_embedded(&h, 2).unwrap();
    let e = fragment_energy_from_rdms(&ints, &DMatrix::zeros(3, 3), &sol.one, &sol.two, &emb, &[0, 1, 2]).unwrap();
    assert!((e - sol.energy).abs() < 1e-10);
    assert!((sol.energy - dense_fci(&ints, 2)).abs() < 1e-10);
    assert!((fragment_electrons(&sol.one, &[0, 1, 2]) - 2.0).abs() < 1e-12);
}

#[test]
fn embedding_hamiltonian_keeps_two_body_terms_on_fragment_only() {
    let p = toy_problem().unwrap();
    let embs = p.embeddings().unwrap();
    let fe = &embs[1];
    let emb = fe.bath.embedding_orbitals();
    let h = build_embedding_hamiltonian(&p.ints, &fe.d_env, &emb, 1, 0.3).unwrap();
    let h0 = build_embedding_hamiltonian(&p.ints, &fe.d_env, &emb, 1, 0.0).unwrap();
    assert!((h0.h1[(0, 0)] - h.h1[(0, 0)] - 0.3).abs() < 1e-14);
    assert!((h0.h1[(1, 1)] - h.h1[(1, 1)]).abs() < 1e-14);
    assert!((h.eri(0, 0, 0, 0) - 2.0).abs() < 1e-12);
    for (pp, q, r, s) in [(1, 1, 1, 1), (0, 0, 1, 1), (0, 1, 0, 1)] {
        assert_eq!(h.eri(pp, q, r, s), 0.0);
    }
    assert!((h.h1.clone() - h.h1.transpose()).abs().max() < 1e-14);
    assert_eq!(fe.n_elec, 2);
}

#[test]
fn noninteracting_chain_is_exact_for_any_fragmentation() {
    let ints = chain_integrals(6, 1.0, 0.3, 0.0, 0.0, 0.0).unwrap();
    let reference = MeanFieldReference::from_core_hamiltonian(&ints.h, 6).unwrap();
    let eig = SymmetricEigen::new(ints.h.clone());
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let exact = 2.0 * ev[..3].iter().sum::<f64>();
    for fragments in [vec![vec![0, 1], vec![2, 3], vec![4, 5]], (0..6).map(|p| vec![p]).collect()] {
        let p = DmetProblem {
            ints: ints.clone(),
            reference: reference.clone(),
            fragments,
            n_electrons: 6,
            bath_threshold: 1e-13,
        };
        let n = p.fragments.len();
        let (res, e) = p.run(&DmetConfig::new(6.0, n)).unwrap();
        assert_eq!(res.iterations, 0);
        assert!((e - exact).abs() < 1e-9, "{e} vs {exact}");
    }
}

#[test]
fn toy_loop_agrees_with_bisection_root() {
    let rep = cmd_dmet_toy(1.0, 1e-10).unwrap();
    assert!(!rep.result.secant_engaged);
    let dn = (rep.result.sweep.n_fragment() - 4.0).abs();
    assert!(dn < 1e-8, "|ΔN| = {dn}");
    assert!((rep.n_bisection - 4.0).abs() < 1e-8);
    assert!((rep.result.delta_mu - rep.bisection_root).abs() < 1e-7);
    assert!((rep.exact_energy - dense_fci(&toy_problem().unwrap().ints, 4)).abs() < 1e-10);
    // single-site embedding recovers most but not all of the correlation
    assert!(rep.energy > rep.exact_energy && rep.energy - rep.exact_energy < 0.1);
}

#[test]
fn large_step_oscillates_and_secant_fallback_converges() {
    let rep = cmd_dmet_toy(3.0, 1e-10).unwrap();
    assert!(rep.result.secant_engaged);
    assert!((rep.result.delta_mu - rep.bisection_root).abs() < 1e-7);
    let signs: Vec<f64> = rep.result.trace.iter().take(3).map(|s| s.residual.signum()).collect();
    assert!(signs.windows(2).any(|w| w[0] != w[1]));
}

#[test]
fn large_step_without_fallback_does_not_converge() {
    let p = toy_problem().unwrap();
    let embs = p.embeddings().unwrap();
    let mut cfg = DmetConfig::new(4.0, 4);
    cfg.step = 3.0;
    cfg.tolerance = 1e-10;
    cfg.max_iter = 30;
    cfg.secant_fallback = false;
    assert!(chemical_potential_loop(|mu| p.sweep(&embs, mu), 0.0, &cfg).is_err());
}

#[test]
fn fragment_count_rises_with_delta_mu() {
    let p = toy_problem().unwrap();
    let embs = p.embeddings().unwrap();
    let ns: Vec<f64> = (-8..=8)
        .map(|k| p.sweep(&embs, k as f64 * 0.25).unwrap().n_fragment())
        .collect();
    for w in ns.windows(2) {
        assert!(w[1] >= w[0] - 1e-12);
    }
    assert!(ns[0] < 4.0 && ns[ns.len() - 1] > 4.0);
    assert!(bisect_delta_mu(&p, 4.0, 1.0, 2.0, 1e-10).is_err() || ns[12] < 4.0);
}

#[test]
fn two_site_fragments_converge_and_improve_on_one_site() {
    let mut p = toy_problem().unwrap();
    let one_site = cmd_dmet_toy(1.0, 1e-8).unwrap().energy;
    p.fragments = vec![vec![0, 1], vec![2, 3]];
    let mut cfg = DmetConfig::new(4.0, 2);
    cfg.tolerance = 1e-8;
    let (res, e) = p.run(&cfg).unwrap();
    assert!((res.sweep.n_fragment() - 4.0).abs() < 1e-8);
    let exact = dense_fci(&p.ints, 4);
    assert!((e - exact).abs() < (one_site - exact).abs(), "{e} {one_site} {exact}");
}

#[test]
fn loop_on_a_linear_response_converges_in_one_step_with_matching_step() {
    // N(δμ) = 4 + 2(δμ − 0.3): a step of ½ lands on the root immediately
    let mut cfg = DmetConfig::new(4.0, 1);
    cfg.step = 0.5;
    cfg.tolerance = 1e-12;
    let solver = |mu: f64| -> ion_dmet::Result<FragmentSweep> {
        Ok(FragmentSweep {
            electrons: vec![4.0 + 2.0 * (mu - 0.3)],
            energies: vec![0.0],
        })
    };
    let res = chemical_potential_loop(solver, 0.0, &cfg).unwrap();
    assert_eq!(res.iterations, 1);
    assert!((res.delta_mu - 0.3).abs() < 1e-12);
    assert_eq!(dmet_total_energy(&[1.0, 2.0], 0.5), 3.5);
    cfg.step = -1.0;
    assert!(chemical_potential_loop(solver, 0.0, &cfg).is_err());
}

#[test]
fn hydrogen_ring_count_loop_needs_almost_no_shift() {
    // By ring symmetry every atom holds one electron. The exact embedded ground
    // state is within a few 1e-3 of that (the tabulated ansatz, not the exact
    // eigenvector, is what carries exactly one); the loop closes the gap with a small δμ.
    let rd = ReferenceData::load_default().unwrap();
    for r in rd.bond_lengths() {
        let fp = rd.fragment(r).unwrap();
        let sweep = qubit_fragment_sweep(&fp, rd.atoms, 0.0).unwrap();
        assert!((sweep.electrons[0] - 1.0).abs() < 1e-2, "R = {r}: {}", sweep.electrons[0]);
        let mut cfg = DmetConfig::new(rd.atoms as f64, rd.atoms);
        cfg.tolerance = 1e-8;
        let res = chemical_potential_loop(|mu| qubit_fragment_sweep(&fp, rd.atoms, mu), 0.0, &cfg).unwrap();
        assert!((res.sweep.n_fragment() - rd.atoms as f64).abs() < 1e-8);
        assert!(res.delta_mu.abs() < 1e-2, "R = {r}: δμ = {}", res.delta_mu);
    }
}

#[test]
fn integral_text_round_trip_and_validation() {
    let ints = chain_integrals(3, 1.0, 0.2, 1.5, 0.3, 0.7).unwrap();
    let back = IntegralSet::parse_text(&ints.to_text()).unwrap();
    assert!((back.h.clone() - &ints.h).abs().max() < 1e-12);
    for (a, b) in back.g.iter().zip(&ints.g) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((back.e_nuc - 0.7).abs() < 1e-12);
    let mut h = DMatrix::zeros(2, 2);
    h[(0, 1)] = 1.0;
    assert!(IntegralSet::new(h, vec![0.0; 16], 0.0).is_err());
    assert!(IntegralSet::new(DMatrix::zeros(2, 2), vec![0.0; 15], 0.0).is_err());
    assert!(IntegralSet::parse_text("L 2\nH 0 5 1.0\n").is_err());
    assert!(MeanFieldReference::from_core_hamiltonian(&ints.h, 3).is_err());
}

#[test]
fn integral_transform_matches_direct_contraction() {
    let ints = chain_integrals(3, 1.0, 0.2, 1.5, 0.3, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0)).qr().q();
    let (h2, g2) = ints.transform(&w);
    assert!((h2 - w.transpose() * &ints.h * &w).abs().max() < 1e-12);
    let (a, b, cc, d) = (0, 2, 1, 1);
    let mut want = 0.0;
    for p in 0..3 {
        for q in 0..3 {
            for r in 0..3 {
                for s in 0..3 {
                    want += w[(p, a)] * w[(q, b)] * w[(r, cc)] * w[(s, d)] * ints.eri(p, q, r, s);
                }
            }
        }
    }
    assert!((g2[((a * 3 + b) * 3 + cc) * 3 + d] - want).abs() < 1e-12);
}
