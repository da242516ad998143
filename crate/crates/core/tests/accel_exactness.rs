//! τ⁺ with its iteration count fixed to n must relate exactly the state
//! pairs of the n-fold iterate of τ, on small explicit models.

use accmc_core::accel::accelerations;
use accmc_core::corpus;
use accmc_core::oracle::acceleration_exactness;

#[test]
fn reverse_loop() {
    let p = corpus::find("reverse").unwrap().program().unwrap();
    let accs = accelerations(&p);
    assert_eq!(accs.len(), 1);
    let (src, acc) = &accs[0];
    let r = acceleration_exactness(&p, src, acc, 3);
    assert_eq!(r.mismatches, Vec::<String>::new());
    assert!(r.compared > 300, "{}", r.compared);
}

#[test]
fn every_recognized_corpus_loop() {
    let mut seen = 0;
    for e in corpus::entries() {
        let p = e.program().unwrap();
        for (src, acc) in accelerations(&p) {
            let r = acceleration_exactness(&p, &src, &acc, 3);
            assert!(
                r.mismatches.is_empty(),
                "{}: {:?}",
                e.name,
                &r.mismatches[..r.mismatches.len().min(3)]
            );
            assert!(r.compared > 0, "{}: {} never compared", e.name, src.name);
            seen += 1;
        }
    }
    assert!(seen >= 12, "{seen}");
}
