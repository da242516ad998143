use accmc_core::accel::preprocess;
use accmc_core::corpus;
use accmc_core::spec_format::{parse_program, print_program};

#[test]
fn corpus_programs_survive_printing() {
    for e in corpus::entries() {
        let p = e.program().unwrap();
        let q = parse_program(&print_program(&p)).unwrap_or_else(|err| panic!("{}: {err}", e.name));
        assert_eq!(p, q, "{}", e.name);
    }
}

#[test]
fn preprocessed_programs_survive_printing() {
    let mut accelerated = 0;
    for e in corpus::entries() {
        let p = preprocess(&e.program().unwrap());
        let text = print_program(&p);
        let q = parse_program(&text).unwrap_or_else(|err| panic!("{}: {err}\n{text}", e.name));
        assert_eq!(p, q, "{}", e.name);
        accelerated += p.transitions.iter().filter(|t| t.is_accelerated()).count();
    }
    assert!(accelerated >= 12, "{accelerated}");
}
