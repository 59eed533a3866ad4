mod common;

use std::fs;
use std::path::Path;

use common::scratch_dir;
use ion_dmet::error::Error;
use ion_dmet::reference::{sha256_hex, verify_manifest, ReferenceData, BASES};

fn source_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

#[test]
fn digest_of_known_input() {
    assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

#[test]
fn shipped_data_verifies_and_covers_every_file() {
    let dir = source_dir();
    let n = verify_manifest(&dir).unwrap();
    let mut files = 0;
    for sub in ["circuits", "fragments"] {
        files += fs::read_dir(dir.join(sub)).unwrap().count();
    }
    // plus the main table
    assert_eq!(n, files + 1);
}

#[test]
fn tampering_is_detected() {
    let dir = scratch_dir("tamper");
    copy_tree(&source_dir(), &dir);
    assert!(ReferenceData::load(&dir).is_ok());
    let victim = dir.join("circuits").join("pre_r1.1_yy.txt");
    let text = fs::read_to_string(&victim).unwrap().replace("0.176", "0.177");
    fs::write(&victim, text).unwrap();
    match ReferenceData::load(&dir) {
        Err(Error::Checksum { file, .. }) => assert_eq!(file, "circuits/pre_r1.1_yy.txt"),
        other => panic!("expected a checksum failure, got {other:?}"),
    }
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn missing_manifest_is_an_error() {
    let dir = scratch_dir("nomanifest");
    copy_tree(&source_dir(), &dir);
    fs::remove_file(dir.join("MANIFEST.sha256")).unwrap();
    assert!(ReferenceData::load(&dir).is_err());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn table_contents_are_consistent() {
    let rd = ReferenceData::load_default().unwrap();
    assert_eq!(rd.bond_lengths(), vec![0.7, 1.0, 1.1, 1.3, 1.6]);
    assert!(rd.chemical_accuracy > 1e-3 && rd.chemical_accuracy < 2e-3);
    for p in &rd.points {
        assert!(p.hf >= p.fci, "R = {}", p.r);
        assert_eq!(p.entropy.is_some(), [0.7, 1.1, 1.6].contains(&p.r));
        assert!(rd.fragment(p.r).is_ok());
        for b in BASES {
            assert!(rd.circuit("pre", p.r, b).is_ok());
            assert_eq!(rd.circuit("post", p.r, b).is_ok(), b != "YY");
        }
    }
    assert!(matches!(rd.point(0.9), Err(Error::UnknownBondLength(_))));
    assert!(rd.fragment(2.0).is_err());
    assert!(rd.circuit("mid", 1.1, "ZZ").is_err());
}

#[test]
fn malformed_table_is_rejected() {
    let dir = source_dir();
    assert!(ReferenceData::parse("", &dir).is_err());
    assert!(ReferenceData::parse("[energies]\n0.7 nope\n", &dir).is_err());
}
