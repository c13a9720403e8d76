use labelnet::dataset::{read_csv, write_csv, FeatureColumn, FeatureMatrix, LabelMatrix, MultiLabelDataset};
use labelnet::discovery::{discover, DiscoveryConfig};
use labelnet::network::{build_network, LabelNetwork};
use proptest::prelude::*;

const TOY: &str = include_str!("data/toy.csv");
const GOLDEN: &str = include_str!("golden/toy_network.json");
const LABELS: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

fn toy_network() -> LabelNetwork {
    let ds = read_csv(TOY.as_bytes(), &LABELS, "toy").unwrap();
    let rel = discover(ds.labels(), &DiscoveryConfig::default()).unwrap();
    build_network(&rel, ds.labels().names()).unwrap()
}

#[test]
fn toy_network_matches_golden() {
    let net = toy_network();
    assert_eq!(net, LabelNetwork::from_json(GOLDEN).unwrap());
    let ours: serde_json::Value = serde_json::from_str(&net.to_json().unwrap()).unwrap();
    let golden: serde_json::Value = serde_json::from_str(GOLDEN).unwrap();
    assert_eq!(ours, golden);
}

#[test]
fn toy_c_parents_after_reduction() {
    let net = toy_network();
    let c = net.node(net.index_of("C").unwrap());
    let parents: Vec<&str> = c.parents.iter().map(|&p| net.node(p).name.as_str()).collect();
    assert_eq!(parents, ["B", "D", "leak__C"]);
}

fn dataset_strategy() -> impl Strategy<Value = MultiLabelDataset> {
    (1usize..12, 1usize..4, 0usize..3).prop_flat_map(|(n, q, f)| {
        (
            prop::collection::vec(prop::collection::vec(any::<bool>(), q), n),
            prop::collection::vec(prop::collection::vec(prop::option::of(-1e6f64..1e6), n), f),
            prop::collection::vec(prop::option::of("[a-z]{1,4}"), n),
        )
            .prop_map(move |(rows, nums, nominal)| {
                let labels = LabelMatrix::from_rows((0..q).map(|j| format!("y{j}")).collect(), &rows).unwrap();
                let mut names: Vec<String> = (0..nums.len()).map(|j| format!("x{j}")).collect();
                let mut columns: Vec<FeatureColumn> = nums.into_iter().map(FeatureColumn::Numeric).collect();
                names.push("tag".into());
                columns.push(FeatureColumn::Nominal(nominal));
                let features = FeatureMatrix::new(n, names, columns).unwrap();
                MultiLabelDataset::new("p", features, labels).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn csv_round_trip(ds in dataset_strategy()) {
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let names: Vec<String> = ds.labels().names().to_vec();
        let back = read_csv(buf.as_slice(), &names, "p").unwrap();
        prop_assert_eq!(back.labels(), ds.labels());
        prop_assert_eq!(back.features().names(), ds.features().names());
        for (a, b) in back.features().columns().iter().zip(ds.features().columns()) {
            // A nominal column of numeric-looking or all-missing text is read back as numeric.
            for r in 0..ds.n_instances() {
                prop_assert_eq!(a.cell_text(r), b.cell_text(r));
            }
        }
    }
}
