use modcc::circuit::Assignment;
use modcc::cnf::{brute_force_formula_sat, random_3cnf, CnfFormula, Lit};
use modcc::dihedral::{
    bool_point, cnf_to_dihedral, point_indicator, poleqv_check, polsat_brute, DihedralGroup, DihedralPolynomial,
    Equivalence,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn group_structure() {
    for m in [3, 9, 15, 45] {
        let g = DihedralGroup::new(m).unwrap();
        let els: Vec<_> = g.elements().collect();
        assert_eq!(els.len() as u64, 2 * m);
        for &a in &els {
            assert_eq!(g.mul(a, g.identity()), a);
            assert_eq!(g.mul(g.inv(a), a), g.identity());
            for &b in &els {
                let ab = g.mul(a, b);
                assert!(els.contains(&ab));
                if m <= 15 {
                    for &c in &els {
                        assert_eq!(g.mul(ab, c), g.mul(a, g.mul(b, c)));
                    }
                }
            }
        }
        // rotations form a cyclic group generated by ρ
        let rho = g.rho_pow(1);
        assert_eq!(g.pow(rho, m), g.identity());
        assert!((1..m).all(|k| g.pow(rho, k) != g.identity()));
        assert_eq!(g.mul(g.sigma(), rho), g.mul(g.inv(rho), g.sigma()));
    }
}

#[test]
fn unary_examples() {
    let g = DihedralGroup::new(15).unwrap();
    assert_eq!(g.e(g.rho_pow(2)), g.identity());
    assert_eq!(g.e(g.element(true, 5)), g.sigma());
    assert_eq!(g.primes(), vec![3, 5]);
    for j in 0..2 {
        assert_eq!(g.b_j(j, g.sigma()).unwrap(), g.rho_j(j).unwrap());
        assert_eq!(g.b_j(j, g.identity()).unwrap(), g.identity());
    }
    assert!(g.e_j(2, g.identity()).is_err());
}

#[test]
fn value_depends_only_on_projection() {
    let phi = CnfFormula::new(3, vec![vec![Lit::new(0, true), Lit::new(1, false)], vec![Lit::new(2, true)]]).unwrap();
    let t = cnf_to_dihedral(&phi, 15).unwrap();
    let g = *t.group();
    let els: Vec<_> = g.elements().collect();
    for &a in &els {
        for &b in &els {
            for &c in &els {
                let x = [a, b, c];
                let proj = x.map(|v| g.e(v));
                assert_eq!(t.eval(&x).unwrap(), t.eval(&proj).unwrap());
            }
        }
    }
}

#[test]
fn unit_clauses() {
    let t = cnf_to_dihedral(&CnfFormula::and(2), 15).unwrap();
    let g = *t.group();
    for mask in 0..4u64 {
        let x = bool_point(&g, 2, mask);
        assert_eq!(t.eval(&x).unwrap() == g.identity(), mask == 3);
        assert_eq!(t.eval_mask(mask), t.eval_boolean(mask));
    }
}

#[test]
fn reduction_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut sat = 0;
    for _ in 0..60 {
        let n = rng.random_range(1..=6);
        let l = rng.random_range(1..=5);
        let phi = random_3cnf(&mut rng, n, l);
        for m in [15, 105] {
            let t = cnf_to_dihedral(&phi, m).unwrap();
            let g = *t.group();
            let sol = polsat_brute(&t, g.identity()).unwrap();
            assert_eq!(sol.is_some(), brute_force_formula_sat(&phi).is_some(), "m={m} {phi}");
            if let Some(x) = sol {
                assert_eq!(t.eval(&x).unwrap(), g.identity());
            }
            // every satisfying point zeroes every expression
            for mask in 0..1u64 << n {
                if phi.satisfied_by(mask) {
                    assert!(t.expressions().iter().all(|e| e.eval_mask(mask) == 0));
                }
            }
            assert!(polsat_brute(&t, g.sigma()).unwrap().is_none());
        }
        sat += brute_force_formula_sat(&phi).is_some() as usize;
    }
    assert!(sat > 0 && sat < 60);
}

#[test]
fn contradiction_has_no_solution() {
    let phi = CnfFormula::new(1, vec![vec![Lit::new(0, true)], vec![Lit::new(0, false)]]).unwrap();
    let t = cnf_to_dihedral(&phi, 15).unwrap();
    assert!(polsat_brute(&t, t.group().identity()).unwrap().is_none());
}

#[test]
fn equivalence_checks() {
    let phi = CnfFormula::new(3, vec![vec![Lit::new(0, true), Lit::new(2, false)], vec![Lit::new(1, true)]]).unwrap();
    let t = cnf_to_dihedral(&phi, 15).unwrap();
    assert_eq!(poleqv_check(&t, &t.clone()).unwrap(), Equivalence::Equal);

    // perturb one point
    let at = 0b101;
    let s = t.plus_at(0, &point_indicator(3, 3, at).unwrap()).unwrap();
    match poleqv_check(&t, &s).unwrap() {
        Equivalence::Differ { point, .. } => assert_eq!(point, bool_point(t.group(), 3, at)),
        Equivalence::Equal => panic!("difference missed"),
    }

    let shifted = t.translate(&[true, false, false]).unwrap();
    assert!(matches!(poleqv_check(&t, &shifted).unwrap(), Equivalence::Differ { .. }));
    let flips = Assignment(vec![true, false, false]);
    for mask in 0..8u64 {
        assert_eq!(shifted.eval_mask(mask), t.eval_mask(mask ^ flips.to_mask()));
    }
}

#[test]
fn flattened_length_grows_with_formula() {
    let small = cnf_to_dihedral(&CnfFormula::and(1), 15).unwrap();
    let big = cnf_to_dihedral(&CnfFormula::and(4), 15).unwrap();
    assert!(small.flattened_length() > 0);
    assert!(big.flattened_length() > small.flattened_length());
    let j = big.summary_json();
    assert_eq!(j["m"], 15);
    assert_eq!(j["flattened_length"], big.flattened_length().to_string());
}

#[test]
fn rejects_bad_parameters() {
    assert!(DihedralGroup::new(10).is_err());
    assert!(cnf_to_dihedral(&CnfFormula::and(2), 9).is_err());
    let t = cnf_to_dihedral(&CnfFormula::and(2), 15).unwrap();
    assert!(DihedralPolynomial::new(15, 2, t.expressions()[..1].to_vec()).is_err());
    assert!(t.eval(&[t.group().identity()]).is_err());
}
