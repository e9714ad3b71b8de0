#![no_main]

use libfuzzer_sys::fuzz_target;
use otlab::planner::AmplificationPlan;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(plan) = AmplificationPlan::from_json(s) {
        plan.validate().expect("accepted plan is consistent");
        let round = AmplificationPlan::from_json(&plan.to_json().to_string())
            .expect("own output reparses");
        assert_eq!(round.leaf_count, plan.leaf_count);
        assert_eq!(round.tree.len(), plan.tree.len());
    }
});
