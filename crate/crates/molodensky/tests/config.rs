use molodensky::config::{parse_config, ConfigError, Shape};
use molodensky_core::driver::DriverConfig;

#[test]
fn empty_file_gives_defaults() {
    let cfg = parse_config("").unwrap();
    assert_eq!(cfg.driver.theta0, 2.6);
    assert_eq!(cfg.driver.kappa, 6.0);
    assert_eq!(cfg.level, 2);
    assert!(cfg.driver.smoother.enabled);
    assert_eq!(cfg.shape, Shape::Icosphere);
    assert_eq!(cfg.driver, DriverConfig::default());
}

#[test]
fn override_keeps_other_defaults() {
    let cfg = parse_config("theta0=3.0\nkappa=6").unwrap();
    assert_eq!(cfg.driver.theta0, 3.0);
    assert_eq!(cfg.driver.kappa, 6.0);
    assert_eq!(cfg.driver.max_iter, DriverConfig::default().max_iter);
}

#[test]
fn comments_and_blank_lines() {
    let cfg = parse_config("# header\n\n level = 3 # finer\nsmoother=off\nrestart_every=0\n").unwrap();
    assert_eq!(cfg.level, 3);
    assert!(!cfg.driver.smoother.enabled);
    assert_eq!(cfg.driver.restart_every, None);
}

#[test]
fn kappa_below_one_rejected_with_line() {
    let e = parse_config("level=1\nkappa=0.5").unwrap_err();
    assert!(matches!(e, ConfigError::Invalid { line: 2, .. }), "{e}");
    assert!(e.to_string().starts_with("line 2"));
}

#[test]
fn unknown_key_names_line() {
    let e = parse_config("theta0=3\n# x\nthetta=1").unwrap_err();
    assert_eq!(e, ConfigError::UnknownKey { line: 3, key: "thetta".into() });
}

#[test]
fn unparsable_values_rejected() {
    for (text, line) in [("tol=abc", 1), ("level=2\nsmoother=maybe", 2), ("max_iter=-1", 1), ("novalue", 1)] {
        let e = parse_config(text).unwrap_err();
        assert!(e.to_string().starts_with(&format!("line {line}")), "{text}: {e}");
    }
}

#[test]
fn level_guard() {
    assert!(parse_config("level=7").is_err());
    assert!(parse_config("shape=cube\nlevel=7").is_ok());
}

#[test]
fn comment_block_lists_every_key() {
    let cfg = parse_config("").unwrap();
    let block = cfg.comment_block();
    for key in ["theta0=2.6", "kappa=6", "level=2", "smoother=on", "restart_every=0"] {
        assert!(block.lines().any(|l| l == format!("# {key}")), "{key}");
    }
}
