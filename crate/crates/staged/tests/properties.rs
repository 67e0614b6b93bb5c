use proptest::prelude::*;

use staged::classifier_typeck::check_classifiers;
use staged::core_machine::run;
use staged::elaborator::{elaborate, CheckKind};
use staged::harness::{analyze, check_relations, duality_failures, gen_program, shrink};
use staged::source_typeck::typecheck_program;
use staged::surface::{parse_program, print_source};

const FUEL: usize = 100_000;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_programs_satisfy_the_relations(seed in any::<u64>(), size in 5usize..40) {
        let p = gen_program(seed, size);
        let report = analyze("prop", &p, FUEL).unwrap();
        let verdicts = check_relations([&report]);
        prop_assert!(verdicts.holds(), "{}\n{:?}", print_source(&p), verdicts.violations);
    }

    #[test]
    fn printing_round_trips_through_the_parser(seed in any::<u64>(), size in 1usize..40) {
        let p = gen_program(seed, size);
        let reparsed = parse_program(&print_source(&p)).unwrap();
        prop_assert_eq!(print_source(&reparsed), print_source(&p));
        prop_assert!(typecheck_program(&reparsed).is_ok());
    }

    #[test]
    fn quoting_a_splice_changes_nothing(seed in any::<u64>(), size in 5usize..40) {
        let p = gen_program(seed, size);
        let failures = duality_failures(&typecheck_program(&p).unwrap().program);
        prop_assert!(failures.is_empty(), "{:?}", failures.first());
    }

    #[test]
    fn runs_are_repeatable(seed in any::<u64>(), kind in prop::sample::select(CheckKind::ALL.to_vec())) {
        let typed = typecheck_program(&gen_program(seed, 25)).unwrap();
        let once = || format!("{:?}", run(elaborate(&typed.program, kind).unwrap(), FUEL, true).unwrap());
        prop_assert_eq!(once(), once());
    }

    #[test]
    fn classifier_acceptance_implies_base_acceptance(seed in any::<u64>()) {
        let p = gen_program(seed, 30);
        if check_classifiers(&p).is_ok() {
            prop_assert!(typecheck_program(&p).is_ok());
        }
    }
}

#[test]
fn shrinking_keeps_an_extrusion_witness() {
    let extrudes = |p: &staged::kernel_syntax::SourceProgram| {
        analyze("shrink", p, FUEL).map(|r| r.naive.lazy_extrusion_final).unwrap_or(false)
    };
    let p = (0..500).map(|s| gen_program(s, 30)).find(|p| extrudes(p)).expect("some generated program extrudes");
    let small = shrink(&p, extrudes);
    assert!(extrudes(&small));
    assert!(print_source(&small).len() <= print_source(&p).len());
}
