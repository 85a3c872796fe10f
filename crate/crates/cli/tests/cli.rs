use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn framebias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_framebias"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SCENE: &str = r#"{
  "video_id": "V1",
  "segment_id": "S1",
  "class_name": "tool",
  "class_color": [0, 200, 0],
  "width": 64,
  "height": 48,
  "native_fps": 10,
  "duration_s": 3,
  "shape": {"kind": "disk", "radius": 6},
  "start": [12.0, 24.0],
  "velocity": [1.5, 0.0]
}"#;

fn synth(dir: &Path) -> String {
    let spec = dir.join("scene.json");
    fs::write(&spec, SCENE).unwrap();
    let data = dir.join("data");
    stdout(&framebias(&[
        "synth",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ]));
    data.to_str().unwrap().to_owned()
}

#[test]
fn plan_prints_indices() {
    assert_eq!(stdout(&framebias(&["plan", "25", "1", "50"])), "0\n25\n");
    assert_eq!(stdout(&framebias(&["plan", "25", "25", "3"])), "0\n1\n2\n");
    assert_eq!(
        stdout(&framebias(&["plan", "25", "10", "25"])),
        "0\n2\n5\n7\n10\n12\n15\n17\n20\n22\n"
    );
    let bad = framebias(&["plan", "25", "30", "50"]);
    assert!(!bad.status.success());
}

fn table_row(md: &str) -> Vec<f64> {
    let row = md.lines().find(|l| l.starts_with("| V1 S1")).unwrap();
    row.split('|')
        .skip(2)
        .filter(|c| !c.trim().is_empty())
        .map(|c| c.trim().trim_matches('*').parse().unwrap())
        .collect()
}

#[test]
fn oracle_evaluation_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let out = tmp.path().join("out");
    stdout(&framebias(&[
        "evaluate",
        "--dataset",
        &data,
        "--fps",
        "1,2,5,10",
        "--out",
        out.to_str().unwrap(),
    ]));
    for p in ["sampled", "anchor"] {
        let md = fs::read_to_string(out.join(format!("{p}.md"))).unwrap();
        assert_eq!(table_row(&md), vec![100.0; 4], "{md}");
    }
    let streaming = table_row(&fs::read_to_string(out.join("streaming.md")).unwrap());
    assert!(streaming.windows(2).all(|w| w[0] <= w[1]), "{streaming:?}");
    assert_eq!(streaming[3], 100.0);
    assert!(streaming[0] < 100.0);

    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("video,segment,class,fps,protocol,mean_iou,evaluated_frames\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let mut outputs = Vec::new();
    for (i, jobs) in ["1", "4"].iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        stdout(&framebias(&[
            "evaluate",
            "--dataset",
            &data,
            "--predictor",
            "jitter",
            "--sigma",
            "1.5",
            "--seed",
            "9",
            "--fps",
            "1,2,5,10",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]));
        let files: Vec<Vec<u8>> = ["results.csv", "sampled.md", "anchor.md", "streaming.md"]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    fs::write(
        tmp.path().join("run.toml"),
        "dataset = \"data\"\nfps = [1, 10]\nprotocols = [\"sampled\"]\nout = \"from-file\"\n\n[predictor]\nkind = \"lag\"\n",
    )
    .unwrap();
    let cfg = tmp.path().join("run.toml");
    let out = tmp.path().join("flag-out");
    stdout(&framebias(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(!tmp.path().join("from-file").exists());
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("sampled.md").exists() && !out.join("anchor.md").exists());
    // lag predictor is imperfect on a moving object
    assert!(table_row(&fs::read_to_string(out.join("sampled.md")).unwrap())[0] < 100.0);
}

#[test]
fn sparse_ground_truth_fails_streaming() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let manifest = Path::new(&data).join("manifest.json");
    let text = fs::read_to_string(&manifest).unwrap();
    let mut segs: serde_json::Value = serde_json::from_str(&text).unwrap();
    let annotated: Vec<usize> = (0..30).filter(|i| *i != 13 && *i != 20).collect();
    segs[0]["annotated_frames"] = serde_json::json!(annotated);
    fs::write(&manifest, segs.to_string()).unwrap();
    for i in [13, 20] {
        fs::remove_file(Path::new(&data).join(format!("V1/S1/masks/{i:05}.png"))).unwrap();
    }
    let out = tmp.path().join("out");
    let o = framebias(&[
        "evaluate",
        "--dataset",
        &data,
        "--fps",
        "1,10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("first missing frame is 13"), "{err}");
    assert!(!out.join("results.csv").exists());

    // sampled at 1 fps only touches frames 0, 10, 20... and 20 is missing
    let o = framebias(&[
        "evaluate",
        "--dataset",
        &data,
        "--fps",
        "1",
        "--protocols",
        "sampled",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("20"));
}

#[test]
fn missing_dataset_is_a_named_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = framebias(&[
        "evaluate",
        "--dataset",
        tmp.path().join("nope").to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("manifest.json"));
}

#[test]
fn render_writes_overlays_and_encoder_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let out = tmp.path().join("overlays");
    let text = stdout(&framebias(&[
        "render",
        "--dataset",
        &data,
        "--fps",
        "1,10",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(text.lines().count(), 2);
    assert!(text
        .lines()
        .all(|l| l.starts_with("ffmpeg ") && l.contains("-framerate 10")));
    for fps in ["1", "10"] {
        let dir = out.join("V1/S1/tool").join(fps);
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 30);
    }
    // at 1 fps frame 5 still shows the frame-0 mask
    let a = fs::read(out.join("V1/S1/tool/10/00005.png")).unwrap();
    let b = fs::read(out.join("V1/S1/tool/1/00005.png")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn report_from_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("r.csv");
    fs::write(
        &csv,
        "video,segment,class,fps,protocol,mean_iou,evaluated_frames\n\
         V1,S1,liver,1,sampled,0.909,10\n\
         V1,S1,liver,10,sampled,0.903,100\n",
    )
    .unwrap();
    let text = stdout(&framebias(&["report", "--csv", csv.to_str().unwrap()]));
    assert!(text.contains("| V1 S1 | **90.9** | 90.3 |"), "{text}");
    let out = tmp.path().join("md");
    stdout(&framebias(&[
        "report",
        "--csv",
        csv.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(out.join("sampled.md").exists() && !out.join("anchor.md").exists());
}
