use std::path::Path;
use std::process::Command;

fn pwdg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pwdg")).args(args).output().expect("run pwdg")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn sweep_csv_is_deterministic_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "scenario = circular\nxi = 1\n# small range\np_range = 3..9:2\n").unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = pwdg(&["sweep-p", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = read(&a);
    assert_eq!(text, read(&b));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sweep,N,l2_rel,h1_rel,residual,cond,seconds");
    let sweep: Vec<usize> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(sweep, vec![3, 5, 7, 9]);
    assert_eq!(lines[1].split(',').nth(1), Some("24"));
}

#[test]
fn overrides_and_stdout() {
    let o = pwdg(&["solve", "--set", "scenario=planewave", "--set", "p=8"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "8");
    assert!(row[2].parse::<f64>().unwrap() < 1e-8);
}

#[test]
fn exit_codes() {
    assert_eq!(pwdg(&["solve", "--set", "colour=red"]).status.code(), Some(2));
    assert_eq!(pwdg(&["solve", "--set", "scenario=circular", "--set", "method=dtn"]).status.code(), Some(2));
    assert_eq!(pwdg(&["solve", "--config", "/nonexistent/file"]).status.code(), Some(2));
    // α₁ = k cos θ + 1 = k at k = 2, θ = −π/3.
    let wood = pwdg(&["solve", "--set", "k=2", "--set", "theta=-pi/3", "--set", "h=3"]);
    assert_eq!(wood.status.code(), Some(3), "{}", String::from_utf8_lossy(&wood.stderr));
}

#[test]
fn compare_writes_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp.csv");
    let o = pwdg(&["compare", "--set", "h=3", "--set", "p_range=3..5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,N,dtn_l2_rel,dtn_h1_rel,impedance_l2_rel,impedance_h1_rel");
    assert_eq!(lines.len(), 4);
}

#[test]
fn mesh_and_matrix_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("mesh.txt");
    let matrix = dir.path().join("matrix.txt");
    let o = pwdg(&[
        "solve", "--set", "h=3", "--mesh-dump", mesh.to_str().unwrap(), "--matrix-dump", matrix.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(&mesh).starts_with("VERTICES"));
    let m = read(&matrix);
    let header: Vec<usize> = m.lines().next().unwrap().split_whitespace().map(|x| x.parse().unwrap()).collect();
    assert_eq!(header[0], 48);
    assert_eq!(m.lines().count(), header[1] + 1);

    let custom = dir.path().join("custom.csv");
    let o = pwdg(&[
        "solve", "--set", "scenario=custom", "--set", &format!("mesh={}", mesh.display()), "--set", "k=5",
        "--set", "theta=-pi/3", "--set", "eps.0=(1.27+0.05i)^2", "--set", "eps.1=1", "--out", custom.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(&custom).lines().nth(1).unwrap().contains("NaN"));
}

#[test]
fn field_dump_with_extension() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("f");
    let o = pwdg(&[
        "field", "--set", "h=3", "--set", "p=5", "--grid", "13", "5", "--extend", "1", "--out", prefix.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let abs = read(&dir.path().join("f_abs.txt"));
    let rows: Vec<Vec<f64>> = abs.lines().skip(1).map(|l| l.split_whitespace().map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 65);
    assert!((rows[0][0] + 2.0 * std::f64::consts::PI).abs() < 1e-9);
    // Columns 4 apart are one period apart; interior rows avoid face ties.
    for r in 0..5 {
        if r == 0 || r == 4 {
            continue;
        }
        let row = &rows[r * 13..(r + 1) * 13];
        for i in 1..5 {
            assert!((row[i][2] - row[i + 4][2]).abs() < 1e-10 * row[i][2].max(1.0));
        }
    }
    assert!(read(&dir.path().join("f_complex.txt")).starts_with("x1 x2 re im"));
    assert!(dir.path().join("f_re.txt").exists() && dir.path().join("f_im.txt").exists());
}

#[test]
fn field_difference_dump() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("bao");
    let o = pwdg(&[
        "field", "--set", "scenario=custom", "--set", "geometry=bao", "--set", "h=1.5", "--set", "p=5",
        "--set", "diff_p=7", "--grid", "6", "6", "--out", prefix.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["bao_abs.txt", "bao_p7_abs.txt", "bao_diff_abs.txt", "bao_diff_complex.txt"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}
