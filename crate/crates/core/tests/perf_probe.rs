use polarlab::*;

#[test]
#[ignore]
fn ell8_probe() {
    let w = BmsChannel::new(vec![
        Atom { p: 0.02, mass: 0.4 },
        Atom { p: 0.2, mass: 0.35 },
        Atom {
            p: 0.45,
            mass: 0.25,
        },
    ])
    .unwrap();
    for ell in [6usize, 7, 8] {
        let g = sample_invertible(ell, 1).unwrap();
        let t = std::time::Instant::now();
        match polar_transform(&w, &g) {
            Ok(out) => {
                let sum: f64 = out.iter().map(|c| c.entropy()).sum();
                println!(
                    "ell={ell} atoms=3: {:?}, chain err {:.2e}, out atoms {:?}",
                    t.elapsed(),
                    (sum - ell as f64 * w.entropy()).abs(),
                    out.iter().map(|c| c.atoms().len()).max()
                );
            }
            Err(e) => println!("ell={ell} atoms=3: {e}"),
        }
    }
}
