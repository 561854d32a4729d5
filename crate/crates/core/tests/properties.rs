mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    #[test]
    fn attention_is_permutation_equivariant(c in attn_case()) {
        check_equivariance(&c).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn attention_outputs_are_convex_combinations(c in attn_case()) {
        check_convex(&c).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn order_two_tensor_attention_is_plain_attention(c in attn_case()) {
        check_order_two(&c).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn quantization_stays_within_half_a_step(case in quant_case()) {
        check_quantization(&case).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn pair_schedule_partitions_all_pairs(case in schedule_case()) {
        check_schedule(&case).map_err(TestCaseError::fail)?;
    }
}
