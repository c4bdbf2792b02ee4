use std::io::Write;
use std::process::{Command, Output};

fn melevy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_melevy"))
        .args(args)
        .env("ME_LEVY_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn field(row: &[String], i: usize) -> f64 {
    row[i].parse().unwrap()
}

fn config(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

const EXP_MODEL: &str = "drift = 1\nsigma = 0\n[neg_jumps]\nlambda = 1\nnum = [1]\nden = [1]\n";

#[test]
fn roots_of_the_exponential_model() {
    let f = config(EXP_MODEL);
    let o = melevy(&["--model", f.path().to_str().unwrap(), "roots", "--s", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().next(), Some("side,re,im,residual"));
    let neg: Vec<_> = rows(&o).into_iter().filter(|r| r[0] == "-").collect();
    assert_eq!(neg.len(), 1);
    assert!((field(&neg[0], 1) - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
    assert_eq!(field(&neg[0], 2), 0.0);
    assert!(field(&neg[0], 3) < 1e-9);
}

#[test]
fn wh_check_passes_and_reports_the_maximum() {
    let o = melevy(&["--model", "builtin:hyperexp_diffusion", "wh-check", "--s", "1", "--omega-max", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = rows(&o);
    assert_eq!(r.len(), 200);
    assert!(field(&r[0], 2) < 1e-8);
}

#[test]
fn wh_check_fails_below_an_impossible_tolerance() {
    let o = melevy(&["--model", "builtin:neg_me_complex", "wh-check", "--s", "1", "--tol", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stdout(&o).is_empty());
}

#[test]
fn occupation_at_zero() {
    let f = config(EXP_MODEL);
    let o = melevy(&["--model", f.path().to_str().unwrap(), "occupation", "--s", "1", "--u", "1", "--x", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = rows(&o);
    assert!((field(&r[0], 1) - 0.5922).abs() < 1e-4);
}

#[test]
fn verb_tables_supply_defaults_and_flags_override() {
    let f = config(&format!("{EXP_MODEL}[occupation]\ns = 1.0\nu = 1.0\nx = 0.0\n"));
    let path = f.path().to_str().unwrap();
    let from_file = melevy(&["--model", path, "occupation"]);
    assert_eq!(from_file.status.code(), Some(0), "{}", stderr(&from_file));
    let explicit = melevy(&["--model", path, "occupation", "--s", "1", "--u", "1", "--x", "0"]);
    assert_eq!(stdout(&from_file), stdout(&explicit));
    let overridden = melevy(&["--model", path, "occupation", "--u", "2"]);
    assert_ne!(stdout(&overridden), stdout(&from_file));
}

#[test]
fn numbers_carry_seventeen_significant_digits() {
    let o = melevy(&["--model", "builtin:drift_exp", "supremum", "--s", "1", "--x", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    for cell in &rows(&o)[0] {
        let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.replace('.', "").len(), 17, "{cell}");
    }
}

#[test]
fn grid_output_is_in_order() {
    let o = melevy(&["--model", "builtin:bm", "infimum", "--s", "1", "--xgrid", "-2:0:5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let xs: Vec<f64> = rows(&o).iter().map(|r| field(r, 0)).collect();
    assert_eq!(xs, vec![-2.0, -1.5, -1.0, -0.5, 0.0]);
}

#[test]
fn overshoot_columns() {
    let o = melevy(&["--model", "builtin:hyperexp_cp", "overshoot", "--level", "1", "--discount", "0.5", "--xgrid", "0:2:3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().next(), Some("level,v,density,atom,continuous_mass,total_mass"));
    let r = rows(&o);
    assert_eq!(r.len(), 3);
    let balance = field(&r[0], 3) + field(&r[0], 4) - field(&r[0], 5);
    assert!(balance.abs() < 1e-8);
}

#[test]
fn ladder_row() {
    let o = melevy(&["--model", "builtin:hyperexp_cp", "ladder", "--s", "0.5", "--r", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().next(), Some("s,r_re,r_im,kappa_re,kappa_im"));
    assert_eq!(rows(&o)[0].len(), 5);
}

#[test]
fn simulate_rows_follow_the_functionals() {
    let o = melevy(&[
        "--model", "builtin:drift_exp", "simulate", "--s", "1", "--paths", "2000", "--seed", "3",
        "--functional", "inf_zero", "--functional", "sup_above:1", "--functional", "occupation:0:1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = rows(&o);
    let names: Vec<&str> = r.iter().map(|x| x[0].as_str()).collect();
    assert_eq!(names, ["inf_zero", "sup_above:1", "occupation:0:1"]);
    assert!(r.iter().all(|x| x[3] == "2000"));
}

#[test]
fn validate_passes_on_every_builtin_model() {
    for name in ["bm", "drift_exp", "drift_erlang2", "hyperexp_cp", "hyperexp_diffusion", "neg_me_complex", "exp_general_pos"] {
        let o = melevy(&["--model", &format!("builtin:{name}"), "validate"]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}{}", stdout(&o), stderr(&o));
        assert!(rows(&o).iter().all(|r| r[3] != "fail"), "{name}");
    }
}

#[test]
fn models_lists_the_catalog() {
    let o = melevy(&["models"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("exp_general_pos"));
}

#[test]
fn unknown_verb_exits_64() {
    let o = melevy(&["--model", "builtin:bm", "frobnicate"]);
    assert_eq!(o.status.code(), Some(64));
    assert!(o.stdout.is_empty());
}

#[test]
fn bad_configs_exit_2() {
    let neg_sigma = config("drift = 1\nsigma = -1\n");
    let o = melevy(&["--model", neg_sigma.path().to_str().unwrap(), "roots", "--s", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sigma"));

    let bad_rate = config("drift = 1\nsigma = 0\n[neg_jumps]\nlambda = 1\nnum = [-0.5]\nden = [-0.5]\n");
    let o = melevy(&["--model", bad_rate.path().to_str().unwrap(), "roots", "--s", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rate must have positive real part"));

    let o = melevy(&["--model", "/nonexistent/model.toml", "roots", "--s", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["--model", "builtin:bm", "roots", "--s", "abc"][..],
        &["--model", "builtin:bm", "occupation", "--s", "1"][..],
        &["roots", "--s", "1"][..],
        &["--model", "builtin:bm", "simulate", "--functional", "nope:1"][..],
        &["--model", "builtin:bm", "infimum", "--s", "1", "--xgrid", "0:1"][..],
    ] {
        let o = melevy(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn preconditions_exit_3_with_the_library_message() {
    let o = melevy(&["--model", "builtin:drift_exp", "ladder", "--s", "1.5", "--r", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("the ladder exponent is defined for 0 < s < 1"));

    let o = melevy(&["--model", "builtin:drift_exp", "overshoot", "--level", "-1", "--s", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("the level must be positive"));

    let o = melevy(&["--model", "builtin:bm", "supremum", "--s", "0", "--x", "1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bad_thread_variable_exits_2() {
    let o = Command::new(env!("CARGO_BIN_EXE_melevy"))
        .args(["models"])
        .env("ME_LEVY_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
