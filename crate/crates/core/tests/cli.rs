use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use monas::report::{self, ResultRow};
use monas::reward::EvaluationResult;
use monas::space::{ActionSequence, Architecture, CondenseNetArch, MacroArch, MacroOp};

fn monas(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monas"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn search_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = monas(
        dir.path(),
        &[
            "search",
            "--space",
            "condensenet",
            "--reward",
            "mixed",
            "--alpha",
            "0.75",
            "--iterations",
            "60",
            "--seed",
            "1",
            "--out",
            "run",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("best architecture: space=condensenet"));
    let run = dir.path().join("run");
    for f in [
        "results.csv",
        "summary.json",
        "stats.csv",
        "front.csv",
        "controller.ckpt",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }
    let rows = report::read_results(fs::File::open(run.join("results.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 60);
    let summary =
        report::Summary::from_json(&fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.iterations, 60);
    assert_eq!(summary.mode, "search");
    assert_eq!(summary.front, report::results_front(&rows));
    let front = report::read_front(fs::File::open(run.join("front.csv")).unwrap()).unwrap();
    assert_eq!(front, summary.front.points());
}

#[test]
fn identical_configs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.conf"),
        "space = macro\nreward.kind = mac\nrun.iterations = 40\nrun.seed = 11\n",
    )
    .unwrap();
    for out in ["a", "b"] {
        let o = monas(
            dir.path(),
            &["search", "--config", "run.conf", "--out", out],
        );
        assert_eq!(code(&o), 0);
    }
    for f in [
        "results.csv",
        "stats.csv",
        "front.csv",
        "ops.csv",
        "layers.csv",
        "controller.ckpt",
    ] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn results_golden() {
    let dir = tempfile::tempdir().unwrap();
    let o = monas(
        dir.path(),
        &[
            "search",
            "--space",
            "condensenet",
            "--evaluator",
            "lookup",
            "--set",
            "evaluator.fallback=true",
            "--reward",
            "power",
            "--iterations",
            "3",
            "--seed",
            "2",
            "--out",
            "g",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for f in ["results.csv", "stats.csv", "front.csv"] {
        let got = fs::read_to_string(dir.path().join("g").join(f)).unwrap();
        let want = fs::read_to_string(golden.join(f)).unwrap();
        assert_eq!(got, want, "{f}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&monas(p, &["search", "--config", "missing.conf"])), 2);
    assert_eq!(
        code(&monas(
            p,
            &["search", "--space", "macro", "--iterations", "0"]
        )),
        2
    );
    assert_eq!(
        code(&monas(p, &["search", "--space", "macro", "--bogus"])),
        2
    );
    assert_eq!(
        code(&monas(
            p,
            &["search", "--space", "macro", "--set", "run.epochs=2"]
        )),
        2
    );
    assert_eq!(
        code(&monas(
            p,
            &["search", "--space", "macro", "--reward", "latency"]
        )),
        2
    );
    assert_eq!(code(&monas(p, &["frobnicate"])), 2);
    assert_eq!(code(&monas(p, &["--help"])), 0);

    fs::write(p.join("bad.conf"), "space = macro\nspace = alexnet\n").unwrap();
    assert_eq!(code(&monas(p, &["search", "--config", "bad.conf"])), 2);

    // Architectures outside the table with no fallback fail at run time.
    let o = monas(
        p,
        &[
            "search",
            "--space",
            "condensenet",
            "--evaluator",
            "lookup",
            "--iterations",
            "50",
        ],
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("iteration"));
}

fn write_arch(dir: &Path, name: &str, arch: &Architecture) -> String {
    fs::write(dir.join(name), arch.to_text()).unwrap();
    name.to_string()
}

#[test]
fn mac_command() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();

    let pool = write_arch(
        p,
        "pool.arch",
        &Architecture::Macro(MacroArch::uniform_op(MacroOp::MaxPool)),
    );
    let o = monas(p, &["mac", "--arch", &pool]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("total: 0\n"));

    // 25·3·32²·32 + 3·25·32·32²·32 + 4·25·32·16²·32 + 4·25·32·8²·32
    let conv = write_arch(
        p,
        "conv.arch",
        &Architecture::Macro(MacroArch::uniform_op(MacroOp::Conv5x5)),
    );
    let o = monas(p, &["mac", "--arch", &conv, "--json"]);
    assert_eq!(code(&o), 0);
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["total_mac"], 113_868_800u64);
    assert_eq!(json["normalized"], 1.0);

    // Layer 5 of an all-sep3x3 network: 32·16·16·(9 + 32).
    let sep = write_arch(
        p,
        "sep.arch",
        &Architecture::Macro(MacroArch::uniform_op(MacroOp::SepConv3x3)),
    );
    let o = monas(p, &["mac", "--arch", &sep]);
    assert!(stdout(&o).contains("layer5: 335872\n"));

    fs::write(p.join("junk.arch"), "space = macro\nlayer1 = conv7x7\n").unwrap();
    assert_eq!(code(&monas(p, &["mac", "--arch", "junk.arch"])), 2);
    let cn = write_arch(
        p,
        "cn.arch",
        &Architecture::CondenseNet(CondenseNetArch {
            stages: [6, 6, 6],
            growths: [4, 4, 4],
        }),
    );
    assert_eq!(code(&monas(p, &["mac", "--arch", &cn])), 2);
}

fn table_rows() -> Vec<ResultRow> {
    let table = monas::evaluator::LookupTable::shipped();
    table
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| ResultRow {
            iteration: i + 1,
            actions: ActionSequence::default(),
            arch: Architecture::CondenseNet(r.arch),
            eval: EvaluationResult::new(1.0 - r.error_pct / 100.0, r.energy_j),
            reward: 0.0,
            grad_norm: 0.0,
        })
        .collect()
}

#[test]
fn pareto_over_table_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let mut rows = table_rows();
    fs::write(
        p.join("r.csv"),
        report::write_results(Vec::new(), &rows).unwrap(),
    )
    .unwrap();
    let o = monas(p, &["pareto", "--results", "r.csv", "--out", "f.csv"]);
    assert_eq!(code(&o), 0);
    let front = fs::read_to_string(p.join("f.csv")).unwrap();
    assert!(front.contains("\n92.16,0.9566,"), "{front}");
    // Sorted by energy, each kept row has lower error than every cheaper
    // kept row; the other five rows are each beaten by one of these.
    let energies: Vec<f64> = report::read_front(front.as_bytes())
        .unwrap()
        .iter()
        .map(|pt| pt.energy)
        .collect();
    assert_eq!(energies, vec![34.88, 42.46, 71.98, 79.93, 92.16]);

    rows.reverse();
    rows.swap(0, 4);
    fs::write(
        p.join("r2.csv"),
        report::write_results(Vec::new(), &rows).unwrap(),
    )
    .unwrap();
    let o = monas(p, &["pareto", "--results", "r2.csv"]);
    assert_eq!(stdout(&o), front);

    fs::write(
        p.join("empty.csv"),
        report::write_results(Vec::new(), &[]).unwrap(),
    )
    .unwrap();
    let o = monas(p, &["pareto", "--results", "empty.csv"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "energy,accuracy,iteration,architecture\n");

    fs::write(p.join("bad.csv"), "iteration,reward\n1,2\n").unwrap();
    assert_eq!(code(&monas(p, &["pareto", "--results", "bad.csv"])), 2);
}

#[test]
fn sample_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = monas(
        p,
        &[
            "search",
            "--space",
            "macro",
            "--reward",
            "mac",
            "--iterations",
            "30",
            "--out",
            "s",
        ],
    );
    assert_eq!(code(&o), 0);
    let o = monas(
        p,
        &[
            "sample",
            "--checkpoint",
            "s/controller.ckpt",
            "--n",
            "25",
            "--reward",
            "mac",
            "--out",
            "smp",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("satisfying: "));
    let samples = report::read_samples(fs::File::open(p.join("smp/samples.csv")).unwrap()).unwrap();
    assert_eq!(samples.len(), 25);
    let layers = report::read_layers(fs::File::open(p.join("smp/layers.csv")).unwrap()).unwrap();
    assert!(layers.iter().all(|row| row.iter().sum::<u64>() == 25));

    let o = monas(
        p,
        &[
            "search",
            "--space",
            "macro",
            "--reward",
            "mac",
            "--iterations",
            "5",
            "--resume",
            "s/controller.ckpt",
            "--out",
            "r",
        ],
    );
    assert_eq!(code(&o), 0);
    let o = monas(
        p,
        &[
            "search",
            "--space",
            "alexnet",
            "--iterations",
            "5",
            "--resume",
            "s/controller.ckpt",
        ],
    );
    assert_eq!(code(&o), 2);
    assert_eq!(code(&monas(p, &["sample", "--checkpoint", "nope.ckpt"])), 2);
}
