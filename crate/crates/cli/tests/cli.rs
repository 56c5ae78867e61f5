use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TETRAHEDRON: &str = r#"{"num_vertices": 4, "faces": [[0,1,2],[0,2,3],[0,3,1],[1,3,2]]}"#;

fn hypack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypack")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

struct Files(TempDir);

impl Files {
    fn new() -> Files {
        let f = Files(tempfile::tempdir().unwrap());
        f.write("tet.json", TETRAHEDRON);
        f
    }

    fn write(&self, name: &str, text: &str) -> String {
        let p = self.0.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    }

    fn path(&self, name: &str) -> String {
        self.0.path().join(name).to_str().unwrap().to_string()
    }

    fn nerve(&self) -> String {
        self.path("tet.json")
    }
}

fn solution(path: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(PathBuf::from(path)).unwrap()).unwrap()
}

fn numbers(v: &serde_json::Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn triangle_prints_exact_values() {
    let o = hypack(&["triangle", "1", "1", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("k_P 2\n"), "{text}");
    let k = [0.3, 2.5, 1.0];
    let o = hypack(&["triangle", "0.3", "2.5", "1"]);
    let t = hypack::hypgeom::triangle_total_curvatures(k).unwrap();
    let text = stdout(&o);
    for (i, row) in text.lines().skip(1).take(3).enumerate() {
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cols[2].parse::<f64>().unwrap().to_bits(), t[i].to_bits());
    }
    let o = hypack(&["triangle", "0", "0", "0"]);
    assert!(stdout(&o).contains("k_P 1\n"));
}

#[test]
fn triangle_rejects_negative_input() {
    assert_eq!(hypack(&["triangle", "1", "1", "-1"]).status.code(), Some(2));
}

#[test]
fn check_exit_codes_follow_the_verdict() {
    let f = Files::new();
    let cases = [
        ("[1,1,1,1]", 0, "Interior"),
        ("[0,2,2,2]", 3, "Boundary {0}"),
        ("[3.2,3.2,3.2,3.2]", 4, "Outside, witness {0,1,2,3}"),
        ("[1,-1,1,1]", 4, "Outside, negative entry"),
    ];
    for (t, code, line) in cases {
        let target = f.write("t.json", &format!(r#"{{"T": {t}}}"#));
        let o = hypack(&["check", &f.nerve(), &target]);
        assert_eq!(o.status.code(), Some(code), "{t}");
        assert!(stdout(&o).starts_with(line), "{t}: {}", stdout(&o));
    }
    let o = hypack(&["check", &f.nerve(), &f.write("bad.json", "{\"T\": [1, 1]}")]);
    assert_eq!(o.status.code(), Some(2));
    let o = hypack(&["check", &f.write("bad.json", "not json"), &f.nerve()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_symmetric_interior_target() {
    let f = Files::new();
    let target = f.write("t.json", r#"{"T": [2, 2, 2, 2]}"#);
    let out = f.path("sol.json");
    let o = hypack(&["solve", &f.nerve(), &target, "-o", &out]);
    assert_eq!(o.status.code(), Some(0));
    let s = solution(&out);
    let k = numbers(&s["k"]);
    let root = hypack::solver::symmetric_tetrahedron_root(2.0);
    assert!(k.iter().all(|x| (x - root).abs() < 1e-8), "{k:?}");
    assert!(s["residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(s["stratum"].as_array().unwrap().len(), 0);
    assert_eq!(s["method"], "newton");
}

#[test]
fn solve_boundary_target_has_exact_zeros() {
    let f = Files::new();
    let target = f.write("t.json", r#"{"T": [0, 2, 2, 2]}"#);
    let out = f.path("sol.json");
    let o = hypack(&["solve", &f.nerve(), &target, "--method", "newton", "-o", &out]);
    assert_eq!(o.status.code(), Some(0));
    let s = solution(&out);
    assert_eq!(numbers(&s["k"])[0], 0.0);
    assert_eq!(numbers(&s["stratum"]), vec![0.0]);
    assert!(s["residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn solve_exit_codes() {
    let f = Files::new();
    let outside = f.write("o.json", r#"{"T": [3.2, 3.2, 3.2, 3.2]}"#);
    assert_eq!(hypack(&["solve", &f.nerve(), &outside]).status.code(), Some(4));
    let inside = f.write("i.json", r#"{"T": [1, 1.5, 2, 2.5]}"#);
    let o = hypack(&["solve", &f.nerve(), &inside, "--method", "newton", "--max-iterations", "1"]);
    assert_eq!(o.status.code(), Some(5));
    let o = hypack(&["solve", &f.nerve(), &inside, "--tol", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hypack(&["solve", &f.nerve(), &inside, "--trajectory", &f.path("t.csv")]);
    assert_eq!(o.status.code(), Some(2));
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

#[test]
fn flow_trajectory_is_logged() {
    let f = Files::new();
    let target = f.write("t.json", r#"{"T": [1, 1.5, 2, 2.5]}"#);
    let (out, csv) = (f.path("sol.json"), f.path("t.csv"));
    let o = hypack(&["solve", &f.nerve(), &target, "--method", "flow", "--trajectory", &csv, "-o", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,k_0,k_1,k_2,k_3,T_0,T_1,T_2,T_3,residual,residual_l2");
    let l2 = column(&text, "residual_l2");
    assert!(l2.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let sup = column(&text, "residual");
    assert!(*sup.last().unwrap() < 1e-10);
    let s = solution(&out);
    assert_eq!(s["method"], "flow");
    assert_eq!(s["steps"].as_u64().unwrap() as usize, sup.len() - 1);
}

fn svg(f: &Files, k: &str, args: &[&str], name: &str) -> (Option<i32>, String) {
    let kp = f.write("k.json", k);
    let out = f.path(name);
    let nerve = f.nerve();
    let mut all = vec!["render", &nerve, &kp, &out];
    all.extend(args);
    let o = hypack(&all);
    (o.status.code(), std::fs::read_to_string(Path::new(&out)).unwrap_or_default())
}

#[test]
fn render_is_deterministic() {
    let f = Files::new();
    let (code, face) = svg(&f, r#"{"k": [1, 1, 1, 1]}"#, &["--face", "0"], "f.svg");
    assert_eq!(code, Some(0));
    // three horocycles: Euclidean circles internally tangent to the unit circle
    let horocycles: Vec<f64> = face
        .lines()
        .filter(|l| l.starts_with("<circle") && l.contains("#1f4e79"))
        .map(|l| {
            let attr = |name: &str| -> f64 {
                let rest = &l[l.find(&format!(" {name}=\"")).unwrap() + name.len() + 3..];
                rest[..rest.find('"').unwrap()].parse().unwrap()
            };
            attr("cx").hypot(attr("cy")) + attr("r")
        })
        .collect();
    assert_eq!(horocycles.len(), 3);
    assert!(horocycles.iter().all(|d| (d - 1.0).abs() < 2e-6), "{horocycles:?}");
    let (_, fan) = svg(&f, r#"{"k": [1, 1, 1, 1]}"#, &["--vertex", "0"], "a.svg");
    let (_, again) = svg(&f, r#"{"k": [1, 1, 1, 1]}"#, &["--vertex", "0"], "b.svg");
    assert_eq!(fan, again);
    // one shaded dual triangle per face of the fan
    assert_eq!(fan.matches("fill=\"#d9d9d9\"").count(), 3);
    // a solution document works as input too
    let sol = r#"{"k": [1, 1, 1, 1], "residual": 0, "stratum": [], "method": "newton", "steps": 0}"#;
    let (code, _) = svg(&f, sol, &["--face", "1"], "s.svg");
    assert_eq!(code, Some(0));
}

#[test]
fn render_rejects_degenerate_center() {
    let f = Files::new();
    let (code, _) = svg(&f, r#"{"k": [0, 1, 1, 1]}"#, &["--vertex", "0"], "x.svg");
    assert_eq!(code, Some(2));
    let (code, _) = svg(&f, r#"{"k": [1, 1, 1, 1]}"#, &["--face", "9"], "x.svg");
    assert_eq!(code, Some(2));
}

#[test]
fn verify_is_deterministic_across_thread_counts() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_hypack"))
            .args(["verify", "--suite", "quick", "--seed", "11"])
            .env("HYPACK_THREADS", threads)
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("4"));
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("PASS gauss-bonnet-bound"));
}
