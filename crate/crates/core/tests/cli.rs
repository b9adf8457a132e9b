use molstory::cli::run;
use molstory::molgraph::{parse_smiles, write_canonical_smiles};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["molstory"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn decompose_lists_fragments() {
    let (code, out, _) = call(&["decompose", "O=C1CC(=O)C=C1C(=O)O"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().filter(|l| l.starts_with("fragment ")).count(), 6);
    assert_eq!(out.lines().filter(|l| l.starts_with("attach ")).count(), 6);
}

#[test]
fn unroll_then_replay() {
    let smiles = "CC1Cc2nccnc2C1";
    let expected = write_canonical_smiles(&parse_smiles(smiles).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("story.txt");
    for seed in ["0", "1", "5"] {
        let (code, story, _) = call(&["unroll", smiles, "--seed", seed]);
        assert_eq!(code, 0);
        std::fs::write(&path, story).unwrap();
        let (code, out, err) = call(&["replay", path.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        assert_eq!(out.trim(), expected);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(call(&["no-such-command"]).0, 2);
    assert_eq!(call(&["decompose"]).0, 2);
    assert_eq!(call(&["generate", "--logS", "1"]).0, 2);
    let (code, _, err) = call(&["decompose", "C1CC"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"));
    assert_eq!(call(&["replay", "/definitely/not/here.txt"]).0, 1);
    assert_eq!(call(&["--help"]).0, 0);
}

#[test]
fn generate_without_weights_falls_back() {
    let (code, out, err) = call(&["generate", "--logS", "-2.5", "--redox", "0.1", "--sa", "3", "--count", "3"]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("no --weights"));
    let finals: Vec<&str> = out.lines().filter(|l| l.starts_with("END ")).collect();
    assert_eq!(finals.len(), 3);
    for l in finals {
        parse_smiles(&l[4..]).unwrap();
    }
}

#[test]
fn train_generate_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let data = "smiles,logS,redox,sascore\n\
                CCO,0.5,-0.1,1.2\nc1ccccc1C,-2.1,0.0,1.7\nCC(=O)O,0.9,0.3,1.4\n\
                c1ccncc1,-0.5,0.1,1.9\nOCC1CCCCC1,-0.8,0.0,2.0\nCC1Cc2nccnc2C1,-1.5,0.2,2.6\n";
    std::fs::write(p("d.csv"), data).unwrap();
    std::fs::write(p("c.cfg"), "epochs = 2\nfrag_dim = 16\nattach_dim = 8\nheads = 2\nlayers = 2\nhidden = 32\ninit_steps = 50\n").unwrap();

    let (code, _, err) = call(&["build-vocab", &p("d.csv"), "--train-split", "--config", &p("c.cfg"), "--out", &p("v.txt")]);
    assert_eq!(code, 0, "{err}");
    let common = ["--config", &p("c.cfg"), "--vocab", &p("v.txt")];
    let with = |args: &[&str]| {
        let mut v: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        v.extend(common.iter().map(|s| s.to_string()));
        v
    };
    let run_owned = |v: Vec<String>| call(&v.iter().map(String::as_str).collect::<Vec<_>>());

    let (code, out, err) = run_owned(with(&["train", &p("d.csv"), "--out", &p("w.bin")]));
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("epoch 1"));
    let (code, _, err) = run_owned(with(&["train-init", &p("d.csv"), "--out", &p("i.bin")]));
    assert_eq!(code, 0, "{err}");

    let gen = with(&[
        "generate", "--weights", &p("w.bin"), "--init", &p("i.bin"), "--logS", "-1", "--redox", "0", "--sa", "2",
        "--count", "2", "--seed", "4",
    ]);
    let (code, a, err) = run_owned(gen.clone());
    assert_eq!(code, 0, "{err}");
    let (_, b, _) = run_owned(gen);
    assert_eq!(a, b);

    let (code, out, _) = call(&["inspect-weights", &p("w.bin")]);
    assert_eq!(code, 0);
    assert!(out.contains("meta.model 1x10"));

    // weights paired with a different vocabulary are rejected
    std::fs::write(p("v2.txt"), {
        let (_, v, _) = call(&["build-vocab", &p("d.csv")]);
        v
    })
    .unwrap();
    let (code, _, err) = call(&[
        "generate", "--weights", &p("w.bin"), "--init", &p("i.bin"), "--vocab", &p("v2.txt"), "--logS", "0",
        "--redox", "0", "--sa", "0",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("different vocabulary"), "{err}");
}
