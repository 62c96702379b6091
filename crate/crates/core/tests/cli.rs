use std::fs;
use std::path::Path;

use certseg::cli::{main_with_args, parse_key_values, RunSpec, EXIT_BAD_INPUT, EXIT_NOT_CONVERGED, EXIT_OK};
use certseg::input::{write_pgm8, Image};

fn pgm_header(path: &Path) -> (String, usize, usize, usize) {
    let bytes = fs::read(path).unwrap();
    let text = String::from_utf8_lossy(&bytes[..20.min(bytes.len())]).into_owned();
    let mut it = text.split_whitespace();
    let magic = it.next().unwrap().to_string();
    let w = it.next().unwrap().parse().unwrap();
    let h = it.next().unwrap().parse().unwrap();
    let max = it.next().unwrap().parse().unwrap();
    (magic, w, h, max)
}

fn run(args: &[&str]) -> i32 {
    let mut all = vec!["certseg", "run", "-q"];
    all.extend_from_slice(args);
    main_with_args(all)
}

#[test]
fn builtin_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let code = run(&[
        "--builtin", "two-gaussian", "--scheme", "fe-prime", "--cycles", "2", "--init-level", "2",
        "--max-level", "4", "--tau", "0.003", "--sigma", "0.003", "--threshold", "1e-6",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    for name in ["segmentation.pgm", "relaxed.pgm", "dual_x.pgm", "dual_y.pgm", "error_density.pgm"] {
        let (magic, w, h, _) = pgm_header(&out.join(name));
        assert_eq!(magic, "P5");
        let expect = if name == "error_density.pgm" { 16 } else { 17 };
        assert_eq!((w, h), (expect, expect), "{name}");
    }
    assert_eq!(pgm_header(&out.join("segmentation.pgm")).3, 255);
    assert_eq!(pgm_header(&out.join("relaxed.pgm")).3, 65535);

    let csv = fs::read_to_string(out.join("certificates.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "cycle,scheme,dofs,E_primal,D_predual,err_u_sq,eta_opt,err_chi,wall_ms");
    assert_eq!(lines.len(), 3);
    for row in &lines[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 9);
        assert_eq!(cols[1], "fe-prime");
        assert_eq!(cols[8], "0.000");
        let err: f64 = cols[5].parse().unwrap();
        assert!(err > 0.0);
    }

    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    let spec = RunSpec::from_key_values(&manifest).unwrap();
    assert_eq!(spec.adapt.cycles, 2);
    assert_eq!(spec.solver.tau, 0.003);
    assert_eq!(spec.to_key_values(), RunSpec::from_key_values(&spec.to_key_values()).unwrap().to_key_values());
    let map = parse_key_values(&manifest).unwrap();
    assert!(map.contains_key("version") && map.contains_key("result.err_u_sq"));
    assert!(fs::read_to_string(out.join("mesh.txt")).unwrap().starts_with("# quadmesh"));
}

#[test]
fn fd_run_is_a_single_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fd");
    let code = run(&[
        "--builtin", "two-gaussian", "--scheme", "fd", "--max-level", "4", "--cycles", "5", "--tau", "0.02",
        "--sigma", "0.02", "--threshold", "1e-6", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let csv = fs::read_to_string(out.join("certificates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("1,fd,289,"));
    assert!(!out.join("mesh.txt").exists());
}

#[test]
fn image_ingestion() {
    let dir = tempfile::tempdir().unwrap();
    let zero = dir.path().join("zero.pgm");
    write_pgm8(&zero, 5, &[0; 25]).unwrap();
    let img = Image::load_pgm(&zero).unwrap();
    assert_eq!(img.level(), 2);
    assert!(img.values().iter().all(|&v| v == 0.0));

    let wrong = dir.path().join("wrong.pgm");
    fs::write(&wrong, [b"P5\n8 8\n255\n".as_slice(), &[0u8; 64]].concat()).unwrap();
    let err = Image::load_pgm(&wrong).unwrap_err().to_string();
    assert!(err.contains("2^L + 1"), "{err}");
    assert_eq!(run(&["--input", wrong.to_str().unwrap()]), EXIT_BAD_INPUT);

    let color = dir.path().join("color.ppm");
    fs::write(&color, [b"P6\n5 5\n255\n".as_slice(), &[0u8; 75]].concat()).unwrap();
    assert!(Image::load_pgm(&color).is_err());
}

#[test]
fn uniform_image_with_auto_means_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.pgm");
    write_pgm8(&flat, 9, &[77; 81]).unwrap();
    assert_eq!(run(&["--input", flat.to_str().unwrap(), "--auto-means", "--out", dir.path().to_str().unwrap()]), EXIT_BAD_INPUT);
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(&[
        "--builtin", "two-gaussian", "--scheme", "fe", "--cycles", "1", "--init-level", "3", "--max-level", "3",
        "--tau", "0.004", "--sigma", "0.004", "--max-iters", "5", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_NOT_CONVERGED);
    assert!(dir.path().join("certificates.csv").exists());
}

#[test]
fn verify_subcommand() {
    assert_eq!(main_with_args(["certseg", "verify", "--suite", "oracle"]), EXIT_OK);
    assert_eq!(main_with_args(["certseg", "verify", "--suite", "other"]), EXIT_BAD_INPUT);
}
