//! End-to-end acceptance checks. Prints one PASS or FAIL line per criterion
//! and exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use staged::classifier_typeck::check_classifiers;
use staged::core_machine::{run, Outcome};
use staged::elaborator::{elaborate, normalize_admin, Census, CheckKind};
use staged::harness::{
    analyze, check_preservation, check_relations, classifier_sound, duality_failures, gen_program, run_core_file,
    run_corpus, subexpressions, Cell, ExtrusionReport, MATRIX_LISTINGS, EXTRA_LISTINGS,
};
use staged::kernel_syntax::{Ast, ExprKind, Nf, SourceProgram};
use staged::source_typeck::{typecheck_program, TypedProgram};
use staged::surface::{parse_core_term, parse_program};

const FUEL: usize = 100_000;
const GENERATED: usize = 1000;
const GEN_SIZE: usize = 30;
const CENSUS_PROGRAM: &str = "fun (x : Nat) -> $(<<fun (y : Nat) -> x + y>>)";

type Verdict = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn listings() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../listings")
}

fn listing(file: &str) -> SourceProgram {
    let text = std::fs::read_to_string(listings().join(file)).unwrap_or_else(|e| panic!("{file}: {e}"));
    parse_program(&text).unwrap_or_else(|d| panic!("{file}: {d:?}"))
}

fn corpus_programs() -> Vec<(&'static str, SourceProgram)> {
    MATRIX_LISTINGS.iter().chain(EXTRA_LISTINGS.iter()).map(|g| (g.id, listing(g.file))).collect()
}

struct Generated {
    seed: u64,
    typed: TypedProgram,
}

fn generated() -> Vec<Generated> {
    (0..GENERATED as u64)
        .map(|seed| {
            let p = gen_program(seed, GEN_SIZE);
            let typed = typecheck_program(&p).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            Generated { seed, typed }
        })
        .collect()
}

fn matrix() -> Verdict {
    let report = run_corpus(&listings(), FUEL).map_err(|e| e.to_string())?;
    let mismatched: Vec<&str> = report.listings.iter().filter(|l| !l.matches()).map(|l| l.golden.id).collect();
    let grid = MATRIX_LISTINGS.iter().all(|g| report.listings.iter().any(|l| l.golden.id == g.id && l.matches()));
    if grid && mismatched.is_empty() {
        Ok(format!("{} listings match the expected grid", report.listings.len()))
    } else {
        Err(format!("mismatched listings {mismatched:?}\n{}", report.grid()))
    }
}

fn relations(corpus: &[(&str, SourceProgram)], programs: &[Generated]) -> Verdict {
    let mut reports: Vec<ExtrusionReport> = Vec::new();
    for (id, p) in corpus {
        reports.push(analyze(id, p, FUEL).map_err(|e| format!("{id}: {e}"))?);
    }
    let corpus_verdicts = check_relations(&reports);
    let mut generated = Vec::new();
    for g in programs {
        generated.push(analyze(&format!("seed{}", g.seed), &g.typed.program, FUEL).map_err(|e| format!("seed {}: {e}", g.seed))?);
    }
    let gen_verdicts = check_relations(&generated);
    let fine = corpus_verdicts.holds() && gen_verdicts.holds() && gen_verdicts.checked >= GENERATED;
    let extruding = generated.iter().filter(|r| r.naive.lazy_extrusion_final).count();
    let eager_only = generated.iter().filter(|r| r.row.lazy == Cell::Value && r.row.eager == Cell::ScopeError).count();
    let summary = format!(
        "corpus {} checked, generated {} checked ({} inconclusive, {extruding} extruding, {eager_only} eager-only rejections), {} violations",
        corpus_verdicts.checked,
        gen_verdicts.checked,
        gen_verdicts.inconclusive,
        corpus_verdicts.violations.len() + gen_verdicts.violations.len()
    );
    if fine {
        Ok(summary)
    } else {
        Err(format!("{summary}: {:?} {:?}", corpus_verdicts.violations, gen_verdicts.violations))
    }
}

fn splice_identity() -> Verdict {
    let typed = typecheck_program(&listing("splice_identity.sl")).map_err(|e| e.to_string())?;
    let t = elaborate(&typed.program, CheckKind::Naive).map_err(|e| e.to_string())?;
    let expected = parse_core_term("tls(do x <- return Ret(Nat(0)) in (λz. return z) x)").map_err(|d| format!("{d:?}"))?;
    if normalize_admin(&t) != expected {
        return Err(format!("elaborated to {t:?}"));
    }
    match run(t, FUEL, false).map_err(|e| e.to_string())?.outcome {
        Outcome::Value { value, .. } if value == Nf::ast(Ast::Ret(Nf::ast(Ast::Nat(0)))) => {
            Ok("elaboration matches and runs to Ret(Nat(0))".into())
        }
        other => Err(format!("ran to {other:?}")),
    }
}

fn census() -> Verdict {
    let p = parse_program(CENSUS_PROGRAM).map_err(|d| format!("{d:?}"))?;
    let typed = typecheck_program(&p).map_err(|e| e.to_string())?;
    let expected = [
        (CheckKind::Lazy, Census { check: 1, check_m: 0, dlet: 1, tls: 1, mkvar: 2 }),
        (CheckKind::Eager, Census { check: 6, check_m: 0, dlet: 2, tls: 1, mkvar: 2 }),
        (CheckKind::C4C, Census { check: 0, check_m: 6, dlet: 2, tls: 1, mkvar: 2 }),
    ];
    for (kind, want) in expected {
        let got = Census::of(&elaborate(&typed.program, kind).map_err(|e| e.to_string())?);
        if got != want {
            return Err(format!("{kind}: got {got:?}, expected {want:?}"));
        }
    }
    Ok("check, check_M and dlet counts match for lazy, eager and c4c".into())
}

fn accum() -> Verdict {
    match run_core_file(&listings().join("accum.core"), FUEL).map_err(|e| e.to_string())? {
        Outcome::Value { value: Nf::Nat(22), .. } => Ok("evaluates to 22".into()),
        other => Err(format!("evaluates to {other:?}")),
    }
}

fn metatheory(programs: &[Generated]) -> Verdict {
    let mut duality = 0;
    let mut round_trips = 0;
    let mut errors = Vec::new();
    let mut runs = 0;
    for g in programs {
        let failures = duality_failures(&g.typed.program);
        if let Some(f) = failures.first() {
            errors.push(format!("seed {} duality under {}: {:?}", g.seed, f.kind, f.expr));
        }
        duality += 1;
        round_trips += subexpressions(&g.typed.program)
            .iter()
            .filter(|(e, _)| matches!(e.kind, ExprKind::Quote(_) | ExprKind::Splice(_)))
            .count();
        for kind in CheckKind::ALL {
            match check_preservation(&g.typed, kind, FUEL) {
                Ok(_) => runs += 1,
                Err(e) => errors.push(format!("seed {} under {kind}: {e}", g.seed)),
            }
        }
    }
    if errors.is_empty() && duality >= GENERATED {
        Ok(format!("duality on {duality} programs ({round_trips} round trips); {runs} elaborations typed with every step preserving the type"))
    } else {
        Err(format!("{} violations, first: {}", errors.len(), errors.first().cloned().unwrap_or_default()))
    }
}

fn determinism(corpus: &[(&str, SourceProgram)]) -> Verdict {
    let mut runs = 0;
    for (id, p) in corpus {
        let typed = typecheck_program(p).map_err(|e| format!("{id}: {e}"))?;
        for kind in CheckKind::ALL {
            let trace = || {
                let t = elaborate(&typed.program, kind).map_err(|e| e.to_string())?;
                run(t, FUEL, true).map(|r| format!("{r:?}")).map_err(|e| e.to_string())
            };
            let (first, second) = (trace()?, trace()?);
            if first != second {
                return Err(format!("{id} under {kind} traced differently"));
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} traced runs repeat byte for byte"))
}

fn classifier_soundness(corpus: &[(&str, SourceProgram)], programs: &[Generated]) -> Verdict {
    let mut accepted = 0;
    let mut unsound = Vec::new();
    let candidates = corpus.iter().map(|(id, p)| (id.to_string(), p)).chain(programs.iter().map(|g| (format!("seed{}", g.seed), &g.typed.program)));
    for (id, p) in candidates {
        match classifier_sound(p, FUEL).map_err(|e| format!("{id}: {e}"))? {
            Some(true) => accepted += 1,
            Some(false) => unsound.push(id),
            None => {}
        }
    }
    let corpus_accepted = corpus.iter().filter(|(_, p)| check_classifiers(p).is_ok()).count();
    if unsound.is_empty() {
        Ok(format!("{accepted} accepted programs ({corpus_accepted} from the corpus) run to closed code"))
    } else {
        Err(format!("unsound: {unsound:?}"))
    }
}

fn main() -> ExitCode {
    let corpus = corpus_programs();
    let programs = generated();
    let criteria: Vec<Criterion> = vec![
        ("1 expressiveness matrix", Box::new(matrix)),
        ("2 correctness relations", Box::new(|| relations(&corpus, &programs))),
        ("3 splice identity end to end", Box::new(splice_identity)),
        ("4 discipline census", Box::new(census)),
        ("5 accum oracle", Box::new(accum)),
        ("6 metatheory properties", Box::new(|| metatheory(&programs))),
        ("7 machine determinism", Box::new(|| determinism(&corpus))),
        ("8 classifier soundness", Box::new(|| classifier_soundness(&corpus, &programs))),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {name}: PASS ({detail}) [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail}) [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
