use std::fs;
use std::process::Command;

fn rstcnn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rstcnn"))
}

#[test]
fn a3_threshold_exits_with_config_code() {
    let out = rstcnn().args(["stab", "trials", "--grad", "0.25"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("A3") && err.contains("1/5"), "{err}");
}

#[test]
fn bad_idx_magic_exits_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.idx");
    fs::write(&bad, [0, 0, 8, 1, 0, 0, 0, 0]).unwrap();
    let status = rstcnn()
        .args(["data", "rs-make", "--images"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("o.idx"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn rs_make_resolves_against_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let mut img = vec![0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 28, 0, 0, 0, 28];
    img.extend((0..28 * 28).map(|i| (i % 251) as u8));
    fs::write(dir.path().join("imgs"), img).unwrap();
    let out = dir.path().join("rs");
    let status = rstcnn()
        .env("RST_DATA_DIR", dir.path())
        .args(["data", "rs-make", "--images", "imgs", "--upsize", "56", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let bytes = fs::read(&out).unwrap();
    assert_eq!(bytes.len(), 16 + 56 * 56);
}

#[test]
fn sweep_artifact_reruns_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    let status = rstcnn()
        .args(["equi", "sweep", "--K", "5", "--L_alpha", "1", "--seeds", "3", "--beta", "-0.25"])
        .args(["--image-size", "20", "--out"])
        .arg(&first)
        .status()
        .unwrap();
    assert!(status.success());
    let status = rstcnn()
        .args(["equi", "sweep", "--config"])
        .arg(&first)
        .arg("--out")
        .arg(&second)
        .status()
        .unwrap();
    assert!(status.success());
    let a = fs::read_to_string(&first).unwrap();
    assert_eq!(a, fs::read_to_string(&second).unwrap());
    let lines: Vec<&str> = a.lines().collect();
    assert!(lines[0].starts_with("# config: "));
    assert_eq!(lines[1], "K,L_alpha,seed,layer,error");
    assert_eq!(lines.len(), 2 + 5);
}

#[test]
fn identity_sweep_is_exactly_zero() {
    let out = rstcnn()
        .args(["equi", "sweep", "--K", "5", "--L_alpha", "2", "--seeds", "0"])
        .args(["--eta", "0", "--beta", "0", "--image-size", "16"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for row in text.lines().skip(2) {
        assert_eq!(row.rsplit(',').next().unwrap().parse::<f64>().unwrap(), 0.0, "{row}");
    }
}
