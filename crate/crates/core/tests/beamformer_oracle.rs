mod common;

use common::{kkt_solve, random_hpd, rel_err};
use ncbf::array_model::ArrayConfig;
use ncbf::beamformer::{build_constraints, lcmv_weights, signal_covariance};
use ncbf::datagen::{sample_scenario, SamplingBounds};
use ncbf::linalg::CMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn closed_form_matches_kkt_identity_and_general_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let bounds = SamplingBounds::default();
    for n in 3..=6 {
        let cfg = ArrayConfig::reference_spacing(n).unwrap();
        for k in 1..=3 {
            for _ in 0..100 {
                let s = sample_scenario(&mut rng, &cfg, k, &bounds).unwrap();
                let c = build_constraints(&cfg, &s.positions(), 0).unwrap();
                let w = lcmv_weights(&c, None).unwrap();
                let kkt = kkt_solve(&CMatrix::identity(n), c.matrix(), c.gains());
                assert!(rel_err(w.entries(), &kkt) < 1e-6, "identity N={n} K={k}");

                let r = random_hpd(&mut rng, n);
                let w = lcmv_weights(&c, Some(&r)).unwrap();
                let kkt = kkt_solve(&r, c.matrix(), c.gains());
                assert!(rel_err(w.entries(), &kkt) < 1e-6, "general R N={n} K={k}");
            }
        }
    }
}

#[test]
fn signal_covariance_reproduces_identity_solution_at_scale() {
    let cfg = ArrayConfig::reference_spacing(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let s = sample_scenario(&mut rng, &cfg, 3, &SamplingBounds::default()).unwrap();
        let c = build_constraints(&cfg, &s.positions(), 0).unwrap();
        let a = lcmv_weights(&c, None).unwrap();
        let b = lcmv_weights(&c, Some(&signal_covariance(&c, 1e-2))).unwrap();
        assert!(rel_err(b.entries(), a.entries()) < 1e-8);
    }
}
