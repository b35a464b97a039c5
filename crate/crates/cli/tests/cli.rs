use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn dynloc(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("run.ini");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_dynloc"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

#[test]
fn enforced_verdicts_set_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dynloc(dir.path(), &["certify"], "[execution]\nenforce = certify.condition,certify.chain\n");
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let stdout = String::from_utf8_lossy(&ok.stdout);
    assert!(stdout.contains("PASS certify.condition"), "{stdout}");

    let fail = dynloc(dir.path(), &["certify"], "[certificate]\nell = 10\n");
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&fail.stderr).contains("verdict failed: certify."));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        "[lattice]\nextnt = 5\n",
        "[nonsense]\nx = 1\n",
        "[lattice]\ndimension = 4\n",
        "[certificate]\nalpha = abc\n",
        "[output]\nformats = xml\n",
    ] {
        let out = dynloc(dir.path(), &["certify"], bad);
        assert_eq!(out.status.code(), Some(2), "{bad}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{bad}");
    }
}

#[test]
fn manifest_hashes_match_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynloc(dir.path(), &["certify", "--seed", "5"], "[execution]\nenforce = certify.condition\n");
    assert_eq!(out.status.code(), Some(0));
    let root = dir.path().join("out");
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(root.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    let names: Vec<&str> = files.iter().map(|f| f["name"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for f in files {
        let bytes = std::fs::read(root.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    let echo = std::fs::read_to_string(root.join(manifest["config_echo"].as_str().unwrap())).unwrap();
    assert!(echo.contains("seed = 5"), "{echo}");

    let mut listed: Vec<String> = std::fs::read_dir(&root)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    listed.sort();
    let mut expected: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    expected.push("manifest.json".into());
    expected.push(manifest["config_echo"].as_str().unwrap().into());
    expected.sort();
    assert_eq!(listed, expected, "stray files in output directory");
}
