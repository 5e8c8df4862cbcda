//! Every shipped system runs end to end and passes.

use indef_lyap::cli::SystemFile;
use indef_lyap::verify::{catalog, residual_check, run_analysis, Status};
use std::path::Path;

#[test]
fn every_entry_passes_its_full_analysis() {
    for entry in catalog() {
        let out = run_analysis(&entry.analysis).unwrap();
        let r = &out.report;
        assert_eq!(r.status, Status::Pass, "{}: {:?}", entry.name, r.reasons);
        assert!(
            r.residual.pass && !r.residual.inconclusive,
            "{}: residual {:?}",
            entry.name,
            r.residual
        );
        assert!(r.bounds.pass, "{}", entry.name);
        let c = r.containment.as_ref().expect("an envelope was built");
        assert!(c.pass, "{}: {:?}", entry.name, c.failure);
        if let Some(rc) = &r.reference_containment {
            assert!(rc.pass, "{}: reference {:?}", entry.name, rc.failure);
        }
    }
}

#[test]
fn residual_checks_are_reproducible() {
    for entry in catalog() {
        let a = &entry.analysis;
        let first = residual_check(&a.certificate, &a.field, &a.sampler).unwrap();
        let second = residual_check(&a.certificate, &a.field, &a.sampler).unwrap();
        assert_eq!(first, second, "{}", entry.name);
    }
}

#[test]
fn reference_kappa_curves_match() {
    for entry in catalog() {
        let Some(reference) = entry.reference_kappa else {
            continue;
        };
        let out = run_analysis(&entry.analysis).unwrap();
        let k = out
            .report
            .kappa
            .as_ref()
            .expect("drift entries report kappa");
        let t0 = entry.analysis.t0;
        let want = reference(k.sup_time, t0);
        assert!(
            (k.sup - want).abs() <= 1e-6,
            "{}: sup {} vs {}",
            entry.name,
            k.sup,
            want
        );
    }
}

#[test]
fn shipped_system_files_match_the_catalog() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../systems");
    for entry in catalog() {
        let path = dir.join(format!("{}.sys", entry.name));
        let text =
            std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(
            text,
            indef_lyap::cli::render_system_file(&entry),
            "{} is stale",
            path.display()
        );
        let parsed = SystemFile::parse(&text)
            .unwrap()
            .analysis(&entry.name, None)
            .unwrap();
        assert_eq!(parsed.certificate, entry.analysis.certificate);
    }
}
