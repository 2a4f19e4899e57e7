use approx::assert_abs_diff_eq;
use kvqe::fermion::{FermionOperator, Ladder};
use kvqe::jw::{jordan_wigner, pauli_product, PauliString, PauliSum};
use kvqe::statevec::{expectation, PauliRotationGroup};
use kvqe::{StateVector, C64};
use proptest::prelude::*;

fn pauli(n: usize) -> impl Strategy<Value = PauliString> {
    let mask = (1u64 << n) - 1;
    (any::<u64>(), any::<u64>()).prop_map(move |(x, z)| PauliString::from_masks(n, x & mask, z & mask).unwrap())
}

fn ladder(n_modes: usize) -> impl Strategy<Value = Ladder> {
    (0..n_modes, any::<bool>()).prop_map(|(m, d)| if d { Ladder::create(m) } else { Ladder::annihilate(m) })
}

fn fermion_op(n_modes: usize) -> impl Strategy<Value = FermionOperator> {
    prop::collection::vec((prop::collection::vec(ladder(n_modes), 0..5), -1.0..1.0f64, -1.0..1.0f64), 1..6).prop_map(
        |terms| {
            terms.into_iter().fold(FermionOperator::zero(), |acc, (ops, re, im)| {
                &acc + &FermionOperator::product(&ops, C64::new(re, im))
            })
        },
    )
}

fn state(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1 << n)
        .prop_filter("non-negligible norm", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-2)
        .prop_map(move |v| {
        let mut s = StateVector::from_amplitudes(n, v.into_iter().map(|(a, b)| C64::new(a, b)).collect()).unwrap();
        s.normalize();
        s
    })
}

fn max_entry_diff(a: &nalgebra::DMatrix<C64>, b: &nalgebra::DMatrix<C64>) -> f64 {
    (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pauli_product_matches_dense(a in pauli(3), b in pauli(3)) {
        let (c, phase) = pauli_product(&a, &b).unwrap();
        let want = a.to_dense() * b.to_dense();
        let got = c.to_dense() * phase.to_complex();
        prop_assert!(max_entry_diff(&want, &got) < 1e-12);
    }

    #[test]
    fn pauli_product_is_associative(a in pauli(4), b in pauli(4), c in pauli(4)) {
        let (ab, p1) = pauli_product(&a, &b).unwrap();
        let (abc, p2) = pauli_product(&ab, &c).unwrap();
        let (bc, q1) = pauli_product(&b, &c).unwrap();
        let (a_bc, q2) = pauli_product(&a, &bc).unwrap();
        prop_assert_eq!(abc, a_bc);
        prop_assert!((p1.to_complex() * p2.to_complex() - q1.to_complex() * q2.to_complex()).norm() < 1e-15);
    }

    #[test]
    fn commutation_flag_matches_dense(a in pauli(3), b in pauli(3)) {
        let ab = a.to_dense() * b.to_dense();
        let ba = b.to_dense() * a.to_dense();
        prop_assert_eq!(a.commutes_with(&b), max_entry_diff(&ab, &ba) < 1e-12);
    }

    #[test]
    fn pauli_display_round_trips(a in pauli(5)) {
        let parsed: PauliString = a.to_string().parse().unwrap();
        prop_assert_eq!(parsed, a);
    }

    #[test]
    fn jordan_wigner_is_an_algebra_homomorphism(a in fermion_op(3), b in fermion_op(3)) {
        let ja = jordan_wigner(&a, 3).unwrap();
        let jb = jordan_wigner(&b, 3).unwrap();
        let jab = jordan_wigner(&(&a * &b), 3).unwrap();
        prop_assert!(jab.distance(&ja.checked_mul(&jb).unwrap()) < 1e-12);
        prop_assert!(jordan_wigner(&a.adjoint(), 3).unwrap().distance(&ja.adjoint()) < 1e-12);
    }

    #[test]
    fn jordan_wigner_matches_fock_matrix(a in fermion_op(4)) {
        let dense = jordan_wigner(&a, 4).unwrap().to_dense();
        prop_assert!(max_entry_diff(&dense, &a.to_dense(4)) < 1e-12);
    }

    #[test]
    fn rotation_group_is_unitary(s in state(4), rots in prop::collection::vec((pauli(4), -1.0..1.0f64), 1..5), theta in -3.0..3.0f64) {
        let group = PauliRotationGroup::new(4, rots.clone()).unwrap();
        let mut t = s.clone();
        group.apply(&mut t, theta).unwrap();
        prop_assert!((t.norm() - 1.0).abs() < 1e-12);
        let mut seq = s.clone();
        for (p, w) in &rots {
            seq.apply_pauli_rotation(p, theta * w).unwrap();
        }
        let overlap = seq.inner(&t).unwrap();
        prop_assert!((overlap - C64::new(1.0, 0.0)).norm() < 1e-10);
        for (p, w) in rots.iter().rev() {
            t.apply_pauli_rotation(p, -theta * w).unwrap();
        }
        prop_assert!((s.inner(&t).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn expectation_ignores_term_order(s in state(3), terms in prop::collection::vec((pauli(3), -1.0..1.0f64), 1..8)) {
        let fwd = PauliSum::from_terms(3, terms.iter().map(|(p, c)| (*p, C64::new(*c, 0.0)))).unwrap();
        let rev = PauliSum::from_terms(3, terms.iter().rev().map(|(p, c)| (*p, C64::new(*c, 0.0)))).unwrap();
        let a = expectation(&s, &fwd).unwrap();
        let b = expectation(&s, &rev).unwrap();
        prop_assert!((a - b).norm() < 1e-12);
        let dense = fwd.to_dense();
        let v = nalgebra::DVector::from_column_slice(s.amplitudes());
        let want = (v.adjoint() * dense * &v)[(0, 0)];
        prop_assert!((a - want).norm() < 1e-12);
    }
}

#[test]
fn canonical_anticommutation_relations() {
    let n = 4;
    for i in 0..n {
        for j in 0..n {
            let ci = FermionOperator::product(&[Ladder::annihilate(i)], C64::new(1.0, 0.0));
            let cj_dag = FermionOperator::product(&[Ladder::create(j)], C64::new(1.0, 0.0));
            let anti = jordan_wigner(&(&(&ci * &cj_dag) + &(&cj_dag * &ci)), n).unwrap();
            let want = if i == j { PauliSum::identity(n, C64::new(1.0, 0.0)) } else { PauliSum::zero(n) };
            assert_abs_diff_eq!(anti.distance(&want), 0.0, epsilon = 1e-14);
            let cj = FermionOperator::product(&[Ladder::annihilate(j)], C64::new(1.0, 0.0));
            let anti = jordan_wigner(&(&(&ci * &cj) + &(&cj * &ci)), n).unwrap();
            assert_abs_diff_eq!(anti.distance(&PauliSum::zero(n)), 0.0, epsilon = 1e-14);
        }
    }
}
