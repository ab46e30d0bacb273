use dsm_core::{anonymize_ids, DsmCase, Edge, Node, NodeId};
use dsm_llm::prompt::{build_prompt, shuffled_edges, HistoricalSolution, KnowledgeMode, PromptContext};
use proptest::prelude::*;

const WITH: &str = include_str!("golden/with_knowledge.txt");
const WITHOUT: &str = include_str!("golden/without_knowledge.txt");

const DESCRIPTION: &str = "This network represents the dependency relationships among conceptual design activities \
for UCAV development at Boeing. Each node corresponds to a specific task or analysis, and directed edges indicate the \
prerequisite relationships between these tasks. Nodes: Each node is a task or analysis in the conceptual design \
process. Edges: Directed edges show the prerequisite relationships between these tasks and analyses.";

const NODES: [(&str, &str); 12] = [
    ("lzOtR", "Create Configuration Concepts"),
    ("yLlKi", "Prepare UCAV Conceptual DR&O"),
    ("Swvi2", "Prepare 3-View Drawing & Geometry Data"),
    ("CDcxF", "Perform Weights Analyses & Evaluation"),
    ("0KGDm", "Perform Aerodynamics Analyses & Evaluation"),
    ("4wHtv", "Perform Multidisciplinary Analyses & Evaluation"),
    ("AgIBP", "Prepare & Distribute Choice Config. Data Set"),
    ("gRtHi", "Perform S&C Characteristics Analyses & Eval."),
    ("GV9RJ", "Make Concept Assessment and Variant Decisions"),
    ("I1j2m", "Perform Performance Analyses & Evaluation"),
    ("Vzzm7", "Perform Propulsion Analyses & Evaluation"),
    ("B0BFG", "Perform Mechanical & Electrical Analyses & Eval."),
];

const EDGES: [(&str, &str); 4] = [("0KGDm", "Swvi2"), ("AgIBP", "lzOtR"), ("0KGDm", "yLlKi"), ("Swvi2", "lzOtR")];

fn id(s: &str) -> NodeId {
    NodeId::new(s).unwrap()
}

fn ucav_context(mode: KnowledgeMode) -> PromptContext {
    PromptContext {
        network_description: DESCRIPTION.to_string(),
        nodes_with_descriptions: NODES.iter().map(|(i, n)| Node { id: id(i), name: n.to_string() }).collect(),
        node_ids: NODES.iter().map(|(i, _)| id(i)).collect(),
        edge_list: EDGES.iter().map(|(d, p)| Edge::new(id(d), id(p))).collect(),
        historical: vec![
            HistoricalSolution {
                solution: "lzOtR, yLlKi, GV9RJ, AgIBP, B0BFG, Vzzm7, Swvi2, CDcxF, 0KGDm, I1j2m, gRtHi, 4wHtv".into(),
                score: 15.0,
            },
            HistoricalSolution {
                solution: "B0BFG, yLlKi, Vzzm7, lzOtR, Swvi2, CDcxF, AgIBP, 0KGDm, GV9RJ, I1j2m, gRtHi, 4wHtv".into(),
                score: 13.0,
            },
        ],
        knowledge_mode: mode,
    }
}

#[test]
fn with_knowledge_matches_golden() {
    assert_eq!(build_prompt(&ucav_context(KnowledgeMode::With)).unwrap(), WITH);
}

#[test]
fn without_knowledge_matches_golden() {
    assert_eq!(build_prompt(&ucav_context(KnowledgeMode::Without)).unwrap(), WITHOUT);
}

#[test]
fn block_headers_present_per_mode() {
    let with = build_prompt(&ucav_context(KnowledgeMode::With)).unwrap();
    let without = build_prompt(&ucav_context(KnowledgeMode::Without)).unwrap();
    assert!(with.contains("<Description of the Entire Network>"));
    assert!(with.contains("<Nodes with Descriptions> [{'id': 'lzOtR', 'name': 'Create Configuration Concepts'}"));
    assert!(!without.contains("<Description of the Entire Network>"));
    assert!(without.contains("<Nodes> ['lzOtR', "));
    for p in [&with, &without] {
        assert!(p.contains("Starts with <order> and ends with </order>."));
        assert!(p.ends_with("Please provide only the order and nothing else."));
    }
}

#[test]
fn rendering_is_deterministic() {
    let case = dsm_core::model::random_case(8, 0.3, 1);
    let ctx = |seed| PromptContext {
        historical: vec![HistoricalSolution { solution: "x".into(), score: 1.0 }],
        ..PromptContext::new(&case, shuffled_edges(&case, seed), &[], KnowledgeMode::With)
    };
    assert_eq!(build_prompt(&ctx(4)).unwrap(), build_prompt(&ctx(4)).unwrap());
}

proptest! {
    #[test]
    fn without_knowledge_hides_names_and_description(
        names in proptest::collection::vec("Zq[a-z]{10,20}", 2..8),
        description in "Zq[a-z ]{20,60}",
        seed in any::<u64>(),
    ) {
        let nodes: Vec<Node> = names
            .iter()
            .enumerate()
            .map(|(i, n)| Node { id: id(&format!("n{i}")), name: n.clone() })
            .collect();
        let edges = vec![Edge::new(nodes[1].id.clone(), nodes[0].id.clone())];
        let case = DsmCase::new(nodes, edges, description.clone(), None).unwrap();
        let (anon, _) = anonymize_ids(&case, seed);
        let mut ctx = PromptContext::new(&anon, shuffled_edges(&anon, seed), &[], KnowledgeMode::Without);
        ctx.historical = vec![HistoricalSolution {
            solution: anon.node_ids().map(|i| i.as_str()).collect::<Vec<_>>().join(", "),
            score: 1.0,
        }];
        let prompt = build_prompt(&ctx).unwrap();
        prop_assert!(!prompt.contains(description.as_str()));
        for n in &names {
            prop_assert!(!prompt.contains(n.as_str()));
        }
    }
}
