use std::path::PathBuf;
use std::process::Command;

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/aoi_ffi.h")
}

#[test]
fn header_declares_every_entry_point() {
    let text = std::fs::read_to_string(header()).unwrap();
    for symbol in [
        "aoi_last_error_message",
        "aoi_derive_params",
        "aoi_game_new_homogeneous",
        "aoi_game_free",
        "aoi_game_node_count",
        "aoi_game_contraction_bound",
        "aoi_game_solve_ne",
        "aoi_game_price_of_anarchy",
        "aoi_game_system_utility",
        "aoi_learning_new",
        "aoi_learning_step",
        "aoi_learning_node_count",
        "aoi_learning_probabilities",
        "aoi_learning_free",
        "typedef struct AoiGame AoiGame;",
        "AOI_STATUS_BUFFER_LENGTH = 4",
    ] {
        assert!(text.contains(symbol), "missing {symbol}");
    }
}

/// Skipped silently when no C compiler is installed.
#[test]
fn header_compiles_as_c() {
    let probe = "#include \"aoi_ffi.h\"\nint main(void) { AoiGame *g = 0; return (int)aoi_game_node_count(g); }\n";
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, probe).unwrap();
    let include = header().parent().unwrap().to_path_buf();
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
    else {
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
