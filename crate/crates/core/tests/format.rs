use modcc::circuit::{from_json, to_json, FormatError, FORMAT_TAG};
use modcc::cnf::{random_3cnf, CnfError, CnfFormula, Lit};
use modcc::compiler::{deep_and, depth2_and};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TWO_LEVEL: &str = r#"{
  "format": "modcc-circuit-v1",
  "num_inputs": 2,
  "constants": [],
  "levels": [{"modulus": 6}, {"modulus": 6}],
  "gates": [
    {"id": 0, "level": 1, "modulus": 3, "accept": [2], "wires": [{"src": {"input": 0}, "mult": 1}, {"src": {"input": 1}, "mult": 1}]},
    {"id": 1, "level": 2, "modulus": 2, "accept": [1], "wires": [{"src": {"gate": 0}, "mult": 1}]}
  ],
  "output": 1
}"#;

#[test]
fn hand_written_circuit_loads() {
    let c = from_json(TWO_LEVEL).unwrap();
    assert_eq!(c.compile().unwrap().truth_table(), vec![false, false, false, true]);
    let again = from_json(&to_json(&c)).unwrap();
    assert_eq!(again, c);
}

#[test]
fn builder_output_round_trips() {
    for c in [depth2_and(6, 5).unwrap(), depth2_and(15, 4).unwrap(), deep_and(6, 3, 4, false).unwrap().circuit] {
        let text = to_json(&c);
        assert!(text.contains(FORMAT_TAG));
        let back = from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(to_json(&back), text);
    }
}

fn rejects(text: &str) -> FormatError {
    from_json(text).expect_err("should be rejected")
}

#[test]
fn rejections() {
    assert!(matches!(rejects("{"), FormatError::Json(_)));
    assert!(matches!(rejects(&TWO_LEVEL.replace("modcc-circuit-v1", "other-v9")), FormatError::Tag(_)));
    assert!(matches!(rejects(&TWO_LEVEL.replace("\"constants\": []", "\"constants\": [2]")), FormatError::Constant(2)));
    // 4 does not divide 6
    assert!(matches!(rejects(&TWO_LEVEL.replace("\"modulus\": 3", "\"modulus\": 4")), FormatError::Invalid(_)));
    // output must sit on the top level
    let low_output = TWO_LEVEL.replace("\"output\": 1", "\"output\": 0");
    assert!(matches!(rejects(&low_output), FormatError::Invalid(_)));
    // inputs only feed level 1
    let input_high = TWO_LEVEL.replace("{\"src\": {\"gate\": 0}, \"mult\": 1}", "{\"src\": {\"input\": 0}, \"mult\": 1}");
    assert!(matches!(rejects(&input_high), FormatError::Invalid(_)));
    let out_of_range = TWO_LEVEL.replace("\"accept\": [1]", "\"accept\": [2]");
    assert!(matches!(rejects(&out_of_range), FormatError::Invalid(_)));
}

#[test]
fn dimacs_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let phi = random_3cnf(&mut rng, 7, 5);
        assert_eq!(CnfFormula::parse_dimacs(&phi.to_dimacs()).unwrap(), phi);
    }
}

#[test]
fn dimacs_parsing() {
    let text = "c comment\np cnf 3 2\n1 -2 0\n3\n2 0\n";
    let phi = CnfFormula::parse_dimacs(text).unwrap();
    assert_eq!(phi.num_vars, 3);
    assert_eq!(phi.clauses, vec![vec![Lit::new(0, true), Lit::new(1, false)], vec![Lit::new(2, true), Lit::new(1, true)]]);
}

#[test]
fn dimacs_rejections() {
    let bad = [
        "1 2 0\n",
        "p cnf 2\n1 0\n",
        "p cnf 2 1\n1 x 0\n",
        "p cnf 2 1\n3 0\n",
        "p cnf 2 1\n1 2\n",
        "p cnf 2 2\n1 0\n",
        "p cnf 4 1\n1 2 3 4 0\n",
        "p cnf 2 1\n0\n",
        "",
    ];
    for text in bad {
        assert!(matches!(CnfFormula::parse_dimacs(text), Err(CnfError::Parse { .. })), "{text:?}");
    }
}
