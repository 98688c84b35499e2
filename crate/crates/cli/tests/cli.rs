use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn smoothvg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoothvg")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stat(out: &Output, key: &str) -> usize {
    let text = String::from_utf8_lossy(&out.stdout);
    let prefix = format!("STAT {key} ");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap_or_else(|| panic!("no {key} in {text}")).parse().unwrap()
}

#[test]
fn render_minimal_scene_writes_png() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("square.png");
    let r = smoothvg(&["render", s(&fixture("square_circle.json")), s(&out), "--resolution", "32x32"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let bytes = std::fs::read(&out).unwrap();
    assert_eq!(&bytes[1..4], b"PNG");
}

#[test]
fn malformed_scene_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"format\": 1,\n  \"domain\": { \"min\": [0, 0] \"max\": [1, 1] }\n}\n").unwrap();
    let r = smoothvg(&["render", s(&bad), s(&dir.path().join("x.png"))]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(!dir.path().join("x.png").exists());
}

#[test]
fn invalid_scene_is_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("flat.json");
    std::fs::write(&bad, r#"{ "format": 1, "domain": { "min": [0, 0], "max": [1, 0] } }"#).unwrap();
    assert_eq!(smoothvg(&["stats", s(&bad)]).status.code(), Some(2));
}

#[test]
fn dump_patches_writes_patch_map() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("img.png");
    let r = smoothvg(&["render", s(&fixture("two_circles.json")), s(&out), "--resolution", "32x32", "--dump-patches"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.exists());
    assert!(dir.path().join("img_patches.png").exists());
    assert!(!dir.path().join("img_masks.png").exists());
}

#[test]
fn all_dumps_and_other_formats() {
    let dir = tempfile::tempdir().unwrap();
    for ext in ["ppm", "pfm"] {
        let out = dir.path().join(format!("img.{ext}"));
        let r = smoothvg(&[
            "render",
            s(&fixture("poisson_band.json")),
            s(&out),
            "--resolution",
            "24",
            "--dump-graph",
            "--dump-masks",
            "--dump-source",
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        assert!(out.exists());
    }
    for layer in ["graph", "masks", "links", "source"] {
        assert!(dir.path().join(format!("img_{layer}.png")).exists(), "{layer}");
    }
    let pfm = std::fs::read(dir.path().join("img.pfm")).unwrap();
    assert!(pfm.starts_with(b"PF\n24 24\n-1.0\n"));
    assert_eq!(pfm.len(), b"PF\n24 24\n-1.0\n".len() + 24 * 24 * 12);
}

#[test]
fn stats_on_empty_scene() {
    let r = smoothvg(&["stats", s(&fixture("empty.json")), "--resolution", "16x8"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for key in ["DCs", "PCs", "GMs", "Vs", "Es"] {
        assert_eq!(stat(&r, key), 0, "{key}");
    }
    assert_eq!(stat(&r, "Ps"), 1);
    assert!(String::from_utf8_lossy(&r.stdout).contains("#Ps"));
}

#[test]
fn stats_on_two_circles_and_resolution_invariance() {
    let lo = smoothvg(&["stats", s(&fixture("two_circles.json")), "--resolution", "16x16"]);
    let hi = smoothvg(&["stats", s(&fixture("two_circles.json")), "--resolution", "80x80"]);
    assert!(lo.status.success() && hi.status.success());
    assert_eq!(stat(&lo, "Ps"), 4);
    for key in ["DCs", "PCs", "GMs", "Vs", "Es", "Ps"] {
        assert_eq!(stat(&lo, key), stat(&hi, key), "{key}");
    }
}

#[test]
fn validate_flags_gap_scene() {
    let r = smoothvg(&["validate", s(&fixture("gap.json"))]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8_lossy(&r.stdout);
    let warning = text.lines().find(|l| l.contains("near-miss endpoints")).expect("near-miss warning");
    assert!(warning.contains("(0, 1.9)") && warning.contains("(0, 2)"), "{warning}");

    let clean = smoothvg(&["validate", s(&fixture("two_circles.json"))]);
    assert_eq!(clean.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&clean.stdout).contains("0 warnings"));

    // a large enough tau snaps the gap shut
    let snapped = smoothvg(&["validate", s(&fixture("gap.json")), "--tau", "0.0144"]);
    assert!(!String::from_utf8_lossy(&snapped.stdout).contains("near-miss"));
}

#[test]
fn validate_rejects_folded_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("folded.json");
    // two corners swapped: the boundary crosses itself
    std::fs::write(
        &path,
        r#"{ "format": 1, "domain": { "min": [0, 0], "max": [1, 1] },
            "gradient_meshes": [ { "rows": 1, "cols": 1, "nodes": [
                { "position": [0.2, 0.2], "color": [1, 0, 0] },
                { "position": [0.8, 0.2], "color": [1, 0, 0] },
                { "position": [0.8, 0.8], "color": [1, 0, 0] },
                { "position": [0.2, 0.8], "color": [1, 0, 0] } ] } ] }"#,
    )
    .unwrap();
    let r = smoothvg(&["validate", s(&path)]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stdout));
    assert!(String::from_utf8_lossy(&r.stderr).contains("folded"));
}

#[test]
fn rendering_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    for out in [&a, &b] {
        let r = smoothvg(&["render", s(&fixture("single_mesh.json")), s(out), "--resolution", "48"]);
        assert!(r.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn flags_override_scene_settings() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.png");
    let r = smoothvg(&["render", s(&fixture("gap.json")), s(&out), "--resolution", "30", "--overlap", "nonsense"]);
    assert_eq!(r.status.code(), Some(1));
    let r = smoothvg(&["stats", s(&fixture("gap.json")), "--resolution", "30", "--tau", "0.0144"]);
    assert!(r.status.success());
    assert_eq!(stat(&r, "Ps"), 2);
    let r = smoothvg(&["stats", s(&fixture("gap.json")), "--resolution", "30", "--tau=-1"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn usage_errors_are_exit_one() {
    assert_eq!(smoothvg(&["render", "--bogus"]).status.code(), Some(1));
    assert_eq!(smoothvg(&[]).status.code(), Some(1));
    assert_eq!(smoothvg(&["stats", s(&fixture("empty.json")), "--resolution", "0x9"]).status.code(), Some(1));
    // 2x1 domain cannot be rendered square
    assert_eq!(smoothvg(&["stats", s(&fixture("empty.json")), "--resolution", "16x16"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let r = smoothvg(&["render", s(&fixture("empty.json")), s(&dir.path().join("x.bmp"))]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn missing_scene_is_reported() {
    let r = smoothvg(&["stats", "/nonexistent/scene.json"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!r.stderr.is_empty());
}
