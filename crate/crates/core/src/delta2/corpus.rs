//! Bundled machines and Δ₂ sets.
//!
//! Copies of the machine sources live in `assets/machines/`.

use std::sync::Arc;

use super::{Delta2Set, FlipSchedule, MachineSource, Program};
use crate::streams::ComputableSet;

/// Step budget for classifying bundled machines.
pub const CLASSIFY_BUDGET: u64 = 100_000;

/// Halts iff the input is even; odd inputs end in a one-instruction loop.
pub const HALT_EVEN: &str = "\
# halts iff r0 is even
top:  DJZ 0 done    # r0 == 0: even
      DJZ 0 spin    # r0 was 1: odd
      DJZ 1 top     # r1 stays 0, so this always jumps
done: HALT
spin: DJZ 1 spin
";

/// Halts iff the input is not a multiple of three.
pub const HALT_NON_MULTIPLE_OF_3: &str = "\
# halts iff r0 mod 3 != 0
top:  DJZ 0 spin    # remainder 0
      DJZ 0 done    # remainder 1
      DJZ 0 done    # remainder 2
      DJZ 1 top
done: HALT
spin: DJZ 1 spin
";

/// Three instructions, never halts; the state repeats after one step.
pub const LOOP3: &str = "\
      INC 0
loop: DJZ 1 loop    # r1 stays 0
      HALT
";

/// Loads 3, doubles it three times, then counts the result down to zero.
pub const P3: &str = "\
       INC 0
       INC 0
       INC 0
       INC 3
       INC 3
       INC 3
round: DJZ 3 drain   # rounds left?
double: DJZ 0 back   # move r0 into r1, twice over
       INC 1
       INC 1
       DJZ 2 double
back:  DJZ 1 next    # move r1 back into r0
       INC 0
       DJZ 2 back
next:  DJZ 2 round
drain: DJZ 0 done
       DJZ 2 drain
done:  HALT
";

fn parse(src: &str) -> Arc<Program> {
    Arc::new(Program::parse(src).expect("bundled program parses"))
}

pub fn looping() -> Arc<Program> {
    parse(LOOP3)
}

pub fn p3() -> Arc<Program> {
    parse(P3)
}

pub fn halt_even() -> Delta2Set {
    Delta2Set::halting("halt-even", MachineSource::OnInput(parse(HALT_EVEN)), CLASSIFY_BUDGET)
}

pub fn halt_non_multiple_of_3() -> Delta2Set {
    Delta2Set::halting(
        "halt-nonmult3",
        MachineSource::OnInput(parse(HALT_NON_MULTIPLE_OF_3)),
        CLASSIFY_BUDGET,
    )
}

/// `n` indexes `[HALT, LOOP3, P3, halt-even on 0, halt-nonmult3 on 0]`;
/// later indices loop.
pub fn halt_corpus() -> Delta2Set {
    Delta2Set::halting(
        "halt-corpus",
        MachineSource::Indexed(vec![
            parse("HALT"),
            looping(),
            p3(),
            parse(HALT_EVEN),
            parse(HALT_NON_MULTIPLE_OF_3),
        ]),
        CLASSIFY_BUDGET,
    )
}

/// Default out; 5 enters at stage 10, 3 enters at 4 and leaves at 40, 12
/// enters at 300, 2 oscillates until stage 11 and ends in.
pub fn flip_stage10_schedule() -> FlipSchedule {
    FlipSchedule::new(
        false,
        [
            (5, 10, true),
            (3, 4, true),
            (3, 40, false),
            (12, 300, true),
            (2, 7, true),
            (2, 9, false),
            (2, 11, true),
        ],
    )
    .expect("distinct stages")
}

pub fn flip_stage10() -> Delta2Set {
    Delta2Set::flip("flip-stage10", flip_stage10_schedule())
}

/// Every `n <= 200` flips once, at stage `2n`, into the set iff `n % 3 == 0`.
pub fn flip_staircase() -> Delta2Set {
    let flips = (0..=200u64).filter(|n| n % 3 == 0).map(|n| (n, 2 * n, true));
    Delta2Set::flip("flip-staircase", FlipSchedule::new(false, flips).expect("distinct stages"))
}

/// All bundled sets.
pub fn builtin_sets() -> Vec<Delta2Set> {
    let mut sets: Vec<Delta2Set> = [
        ComputableSet::Evens,
        ComputableSet::Odds,
        ComputableSet::Primes,
        ComputableSet::Squares,
    ]
    .into_iter()
    .map(Delta2Set::recursive)
    .collect();
    sets.extend([
        flip_stage10(),
        flip_staircase(),
        halt_even(),
        halt_non_multiple_of_3(),
        halt_corpus(),
    ]);
    sets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delta2::{Outcome, ToyMachine};

    #[test]
    fn halt_even_classification() {
        let set = halt_even();
        for n in 0..=100 {
            assert_eq!(set.truth(n), Some(n % 2 == 0), "n={n}");
        }
        // three steps per pair removed, then the jump and HALT
        if let crate::delta2::SetKind::Halting(h) = set.kind() {
            assert_eq!(h.outcome(10), Outcome::Halts(17));
        }
    }

    #[test]
    fn halt_nonmult3_classification() {
        let set = halt_non_multiple_of_3();
        for n in 0..=100 {
            assert_eq!(set.truth(n), Some(n % 3 != 0), "n={n}");
        }
    }

    #[test]
    fn p3_halting_time() {
        // 3 doubled three times is 24; step count pinned from one interpreter run
        let m = ToyMachine::new(p3(), 0);
        let Outcome::Halts(steps) = m.classify(CLASSIFY_BUDGET) else {
            panic!("P3 must halt");
        };
        assert_eq!(steps, P3_STEPS);
        assert!(m.halts_within(steps));
        assert!(!m.halts_within(steps - 1));
    }

    const P3_STEPS: u64 = 279;

    #[test]
    fn corpus_truth() {
        let set = halt_corpus();
        let truth: Vec<Option<bool>> = (0..8).map(|n| set.truth(n)).collect();
        assert_eq!(
            truth,
            [Some(true), Some(false), Some(true), Some(true), Some(false), Some(false), Some(false), Some(false)]
        );
    }

    #[test]
    fn staircase_limits() {
        let s = flip_staircase();
        for n in 0..=100 {
            assert_eq!(s.truth(n), Some(n % 3 == 0));
        }
    }
}
