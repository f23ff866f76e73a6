use hypotree_core::generation::{
    build_branch_prompt, build_initial_prompt, generate, parse_branch_response, parse_initial_response,
    strip_code_fence, GenerationError, ProviderConfig, SYSTEM_INSTRUCTIONS,
};
use hypotree_core::model::{DiagramTree, DraftSource, HypothesisDraft};
use hypotree_testkit::{mutate, ChaCha8Rng};
use proptest::prelude::*;
use rand::SeedableRng;

const SUMMARY: &str = "dataset: census\nrows: 4\ncolumns:\n- age (numeric): unique=4, nulls=0, min=23, max=52";

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn prestige_node() -> (DiagramTree, hypotree_core::NodeId) {
    let mut tree = DiagramTree::new("income inequality");
    let root = tree.root_id().clone();
    let d = HypothesisDraft {
        title: "Institution Prestige".into(),
        hypothesis_text: "There is a positive association between the prestige of the educational institution attended and income levels.".into(),
        visualization_idea: "bar chart of income by institution".into(),
        rationale: "r".into(),
        related_work: String::new(),
        source_kind: DraftSource::Branch,
    };
    let ids = tree.add_children(&root, &[d], None).unwrap();
    (tree, ids[0].clone())
}

#[test]
fn initial_prompt_matches_golden() {
    let bundle = build_initial_prompt(SUMMARY, "data analyst", 5);
    assert_eq!(bundle.system_text, golden("initial_system.txt"));
    assert_eq!(bundle.assembled, golden("initial_assistant.txt"));
    assert!(bundle.user_text.starts_with("The number of Hypothesis to generate is 5."));
    assert_eq!(bundle.system_text, SYSTEM_INSTRUCTIONS);
    assert_eq!(bundle, build_initial_prompt(SUMMARY, "data analyst", 5));
}

#[test]
fn branch_prompts_match_golden() {
    let (tree, id) = prestige_node();
    let node = tree.get(&id).unwrap();
    let with = build_branch_prompt(node, Some("University prestige comes from previous wealth")).unwrap();
    assert_eq!(with.assembled, golden("branch_with_input.txt"));
    assert!(with.assembled.contains("generate 3 new and more insightful hypotheses"));
    let without = build_branch_prompt(node, None).unwrap();
    assert_eq!(without.assembled, golden("branch_without_input.txt"));
    assert!(!without.assembled.contains("user input"));
    assert_eq!(
        build_branch_prompt(tree.root(), None).unwrap_err(),
        GenerationError::RootNotBranchablePromptless
    );
}

fn valid_initial() -> String {
    golden("initial_response.json")
}

fn valid_branch() -> String {
    golden("branch_response.json")
}

#[test]
fn fixtures_round_trip_all_fields_verbatim() {
    let raw: serde_json::Value = serde_json::from_str(&valid_initial()).unwrap();
    let drafts = parse_initial_response(&valid_initial()).unwrap();
    assert_eq!(drafts.len(), 5);
    for (d, item) in drafts.iter().zip(raw.as_array().unwrap()) {
        assert_eq!(d.hypothesis_text, item["hypothesis"]);
        assert_eq!(d.visualization_idea, item["visualization"]);
        assert_eq!(d.rationale, item["rationale"]);
        assert!(item["hypothesis"].as_str().unwrap().contains(&format!("[{}]", d.title)));
        assert!(d.related_work.is_empty());
    }
    let raw: serde_json::Value = serde_json::from_str(strip_code_fence(&valid_branch())).unwrap();
    let drafts = parse_branch_response(&valid_branch()).unwrap();
    assert_eq!(drafts.len(), 3);
    for (d, item) in drafts.iter().zip(raw.as_array().unwrap()) {
        assert_eq!(d.title, item["title"]);
        assert_eq!(d.hypothesis_text, item["hypothesis"]);
        assert_eq!(d.related_work, item["relatedWork"]);
        assert_eq!(d.visualization_idea, item["visualization"]);
        assert_eq!(d.rationale, item["rationale"]);
    }
}

fn typed(result: Result<Vec<HypothesisDraft>, GenerationError>) -> bool {
    match result {
        Ok(_) => true,
        Err(GenerationError::MalformedResponse(_) | GenerationError::WrongCardinality { .. }) => true,
        Err(_) => false,
    }
}

proptest! {
    #[test]
    fn mutated_payloads_give_typed_errors(seed in any::<u64>(), rounds in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = valid_initial();
        let mut b = valid_branch();
        for _ in 0..rounds {
            a = mutate(&mut rng, &a);
            b = mutate(&mut rng, &b);
        }
        prop_assert!(typed(parse_initial_response(&a)));
        prop_assert!(typed(parse_branch_response(&b)));
    }

    #[test]
    fn arbitrary_text_never_panics(raw in ".{0,200}") {
        prop_assert!(typed(parse_initial_response(&raw)));
        prop_assert!(typed(parse_branch_response(&raw)));
    }

    #[test]
    fn mock_output_always_parses(summary in "[a-z ]{1,40}", cols in proptest::collection::vec("[a-z_]{1,12}", 0..8)) {
        let bundle = build_initial_prompt(&summary, "data analyst", 5).with_columns(cols.clone());
        let raw = generate(&ProviderConfig::mock(), &bundle).unwrap();
        let drafts = parse_initial_response(&raw).unwrap();
        prop_assert_eq!(drafts.len(), 5);
        // Parsed fields appear verbatim in the raw text.
        let value: serde_json::Value = serde_json::from_str(&raw).unwrap();
        for (d, item) in drafts.iter().zip(value.as_array().unwrap()) {
            prop_assert_eq!(&d.hypothesis_text, item["hypothesis"].as_str().unwrap());
        }

        let (tree, id) = prestige_node();
        let bundle = build_branch_prompt(tree.get(&id).unwrap(), Some(&summary)).unwrap().with_columns(cols);
        let raw = generate(&ProviderConfig::mock(), &bundle).unwrap();
        prop_assert_eq!(parse_branch_response(&raw).unwrap().len(), 3);
    }
}
