//! The generated header must be valid C and C++ and declare every export.

use std::path::PathBuf;
use std::process::Command;

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("modify.h")
}

#[test]
fn header_declares_the_exports() {
    let h = std::fs::read_to_string(header()).expect("header generated by build.rs");
    for f in [
        "modify_loss_bank_new",
        "modify_loss_bank_difficulty",
        "modify_capability_tracker_observe",
        "modify_no_gate",
        "modify_rgb_shuffle",
        "modify_config_parse",
        "modify_train",
        "modify_run_result_free",
        "modify_last_error_message",
    ] {
        assert!(h.contains(&format!("{f}(")), "missing {f}");
    }
    assert!(h.contains("typedef struct ModifyLossBank ModifyLossBank;"));
    assert!(h.contains("MODIFY_STATUS_DIVERGENCE = 4"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        if Command::new(cc).arg("--version").output().is_err() {
            eprintln!("{cc} not available; skipping");
            continue;
        }
        let out =
            Command::new(cc).args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang]).arg(header()).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
