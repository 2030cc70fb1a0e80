//! Reports recomputed from the stored densities must match the stored reports.
//! Regenerate with `lsi-instab fixtures-regen --out crates/core/tests/fixtures`.

use std::path::PathBuf;

use lsi_core::density::{make_bump_family, make_heavytail_family, make_shifted_gaussian, PiecewiseLogDensity};
use lsi_core::functionals::{compute_report, FunctionalReport};

const NAMES: [&str; 4] = ["bump_s1_t2_k10", "bump_s1_t0.5_k6", "shifted_gaussian_b3", "heavytail_k5"];

fn read(name: &str, suffix: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(format!("{name}.{suffix}.json"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn rebuilt(name: &str) -> PiecewiseLogDensity {
    match name {
        "bump_s1_t2_k10" => make_bump_family(1.0, 2.0, 10.0),
        "bump_s1_t0.5_k6" => make_bump_family(1.0, 0.5, 6.0),
        "shifted_gaussian_b3" => make_shifted_gaussian(3.0),
        "heavytail_k5" => make_heavytail_family(5.0),
        _ => unreachable!(),
    }
    .unwrap()
}

fn close(a: f64, b: f64, what: &str) {
    let tol = 1e-9 * (1.0 + a.abs().max(b.abs()));
    assert!((a - b).abs() <= tol || (a.is_infinite() && a == b), "{what}: {a} vs {b}");
}

#[test]
fn densities_round_trip() {
    for name in NAMES {
        let stored = PiecewiseLogDensity::from_json(&read(name, "density")).unwrap();
        let fresh = rebuilt(name);
        assert_eq!(stored.to_json().unwrap(), fresh.to_json().unwrap(), "{name}");
        for x in [-4.0, -0.3, 0.0, 1.0, 2.5, 9.99, 10.01, 12.0] {
            close(stored.log_density(x), fresh.log_density(x), name);
        }
    }
}

#[test]
fn reports_are_reproduced() {
    for name in NAMES {
        let want: FunctionalReport = serde_json::from_str(&read(name, "report")).unwrap();
        let f = PiecewiseLogDensity::from_json(&read(name, "density")).unwrap();
        let got = compute_report(&f, &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(got.label, want.label);
        close(got.fisher_info.value, want.fisher_info.value, "I");
        close(got.rel_entropy.value, want.rel_entropy.value, "H");
        close(got.lsi_deficit.value, want.lsi_deficit.value, "delta");
        assert_eq!(got.moments.len(), want.moments.len());
        for (g, w) in got.moments.iter().zip(&want.moments) {
            assert_eq!(g.p, w.p);
            close(g.value.to_f64(), w.value.to_f64(), &format!("{name} m{}", g.p));
        }
        for (g, w) in got.lp_dist.iter().zip(&want.lp_dist) {
            close(g.value.ln(), w.value.ln(), &format!("{name} ln L{}", g.p));
        }
    }
}

#[test]
fn pinned_values() {
    let r: FunctionalReport = serde_json::from_str(&read("bump_s1_t2_k10", "report")).unwrap();
    // I(f_10) = 400/201 at s = 1, t = 2
    close(r.fisher_info.value, 2.0 * (1.0 - 1.0 / 201.0), "I(f_10)");
    let g: FunctionalReport = serde_json::from_str(&read("shifted_gaussian_b3", "report")).unwrap();
    close(g.fisher_info.value, 9.0, "I(g_3)");
    close(g.rel_entropy.value, 4.5, "H(g_3)");
}
