//! Seeded synthetic data with planted structure, used by the test suites,
//! the benchmarks and the end-to-end smoke run.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{make_concept_token, ConceptType};
use crate::downstream::{DdiInstance, DdiLabel, PairInstance};
use crate::embedding::{cosine, Embedding};
use crate::intrinsic::{ConceptGroup, GroupDataset};

/// Tokens shared by both clusters.
pub const SHARED_WORDS: [&str; 5] = ["the", "of", "and", "in", "with"];

/// A corpus whose documents each draw from one of two disjoint token
/// clusters, with about 20% shared function words.
#[derive(Clone, Debug)]
pub struct TwoClusterCorpus {
    pub documents: Vec<Vec<String>>,
    /// Cluster members; both mix plain words and concept tokens.
    pub clusters: [Vec<String>; 2],
}

pub fn two_cluster_corpus(total_tokens: usize, seed: u64) -> TwoClusterCorpus {
    const DOC_LEN: usize = 50;
    let cluster = |c: usize| -> Vec<String> {
        let words = (0..10).map(move |i| format!("{}{i}", ["kinase", "tumor"][c]));
        let concepts = (0..5).map(move |i| match c {
            0 => make_concept_token(ConceptType::Gene, &format!("{}", 100 + i)),
            _ => make_concept_token(ConceptType::Disease, &format!("MESH:D00{i}")),
        });
        words.chain(concepts).collect()
    };
    let clusters = [cluster(0), cluster(1)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_docs = total_tokens.div_ceil(DOC_LEN);
    let documents = (0..n_docs)
        .map(|d| {
            let members = &clusters[d % 2];
            (0..DOC_LEN)
                .map(|_| {
                    if rng.random_bool(0.2) {
                        SHARED_WORDS.choose(&mut rng).unwrap().to_string()
                    } else {
                        members.choose(&mut rng).unwrap().clone()
                    }
                })
                .collect()
        })
        .collect();
    TwoClusterCorpus { documents, clusters }
}

/// Mean cosine over distinct within-cluster pairs minus mean cosine over
/// cross-cluster pairs. Tokens missing from the embedding are skipped.
pub fn cluster_separation(embedding: &Embedding, clusters: &[Vec<String>; 2]) -> f64 {
    let present: Vec<Vec<&[f32]>> =
        clusters.iter().map(|c| c.iter().filter_map(|t| embedding.vector(t)).collect()).collect();
    let (mut within, mut nw) = (0.0, 0usize);
    for c in &present {
        for (i, a) in c.iter().enumerate() {
            for b in &c[i + 1..] {
                within += cosine(a, b).unwrap_or(0.0);
                nw += 1;
            }
        }
    }
    let (mut across, mut na) = (0.0, 0usize);
    for a in &present[0] {
        for b in &present[1] {
            across += cosine(a, b).unwrap_or(0.0);
            na += 1;
        }
    }
    within / nw.max(1) as f64 - across / na.max(1) as f64
}

/// Five PubTator documents. Document 123 follows the usual chemical /
/// gene / species example. Across the file there is one offset-mismatched
/// annotation, two id-less annotations, one multi-id annotation and one
/// relation line.
pub fn pubtator_fixture() -> String {
    let mut s = String::new();
    s.push_str("123|t|MLN4924 treatment delayed SGK degradation\n");
    s.push_str("123|a|ER-alpha expression in human cells.\n");
    s.push_str("123\t0\t7\tMLN4924\tChemical\tMESH:C539933\n");
    s.push_str("123\t42\t50\tER-alpha\tGene\t2099\n");
    s.push_str("123\t65\t70\thuman\tSpecies\t9606\n\n");

    s.push_str("200|t|Aspirin reduces colorectal cancer risk\n");
    s.push_str("200|a|Daily aspirin lowered incidence of colorectal cancer in mice.\n");
    s.push_str("200\t0\t7\tAspirin\tChemical\tMESH:D001241\n");
    s.push_str("200\t16\t33\tcolorectal cancer\tDisease\tMESH:D015179\n");
    s.push_str("200\t45\t52\taspirin\tChemical\tMESH:D001241\n");
    s.push_str("200\t74\t91\tcolorectal cancer\tDisease\tMESH:D015179\n");
    s.push_str("200\t95\t99\tmice\tSpecies\t10090\n");
    s.push_str("200\tCID\tMESH:D001241\tMESH:D015179\n\n");

    s.push_str("301|t|BRCA1 mutations in breast cancer\n");
    s.push_str("301|a|The c.68_69delAG variant of BRCA1 was found in MCF-7 cells.\n");
    s.push_str("301\t0\t5\tBRCA1\tGene\t672\n");
    s.push_str("301\t19\t32\tbreast cancer\tDisease\tMESH:D001943;MESH:D001940\n");
    s.push_str("301\t37\t49\tc.68_69delAG\tDNAMutation\tc|DEL|68_69|AG\n");
    s.push_str("301\t61\t66\tBRCA1\tGene\t672\n");
    s.push_str("301\t80\t85\tMCF-7\tCellLine\tCVCL:0031\n\n");

    s.push_str("402|t|Metformin and diabetes\n");
    s.push_str("402|a|Metformin improved glucose control in patients with type 2 diabetes.\n");
    s.push_str("402\t0\t9\tMetformin\tChemical\tMESH:D008687\n");
    s.push_str("402\t14\t22\tdiabetes\tDisease\t-\n");
    s.push_str("402\t23\t32\tMetformim\tChemical\tMESH:D008687\n");
    s.push_str("402\t61\t69\tpatients\tSpecies\t9606\n");
    s.push_str("402\t75\t90\ttype 2 diabetes\tDisease\tMESH:D003924\n\n");

    s.push_str("505|t|TP53 loss in lung adenocarcinoma\n");
    s.push_str("505|a|Loss of TP53 promotes tumor growth.\n");
    s.push_str("505\t0\t4\tTP53\tGene\t7157\n");
    s.push_str("505\t13\t32\tlung adenocarcinoma\tDisease\tMESH:D000077192\n");
    s.push_str("505\t41\t45\tTP53\tGene\t7157\n");
    s.push_str("505\t55\t60\ttumor\tDisease\n");
    s
}

/// Gene and disease mentions used by [`synthetic_pubtator`]; the first
/// cluster is genes with kinase vocabulary, the second diseases.
const GENE_MENTIONS: [(&str, &str); 6] =
    [("BRCA1", "672"), ("TP53", "7157"), ("EGFR", "1956"), ("KRAS", "3845"), ("MYC", "4609"), ("PTEN", "5728")];
const DISEASE_MENTIONS: [(&str, &str); 6] = [
    ("asthma", "MESH:D001249"),
    ("diabetes", "MESH:D003920"),
    ("obesity", "MESH:D009765"),
    ("arthritis", "MESH:D001168"),
    ("psoriasis", "MESH:D011565"),
    ("anemia", "MESH:D000740"),
];
const GENE_WORDS: [&str; 8] = ["kinase", "phosphorylation", "signaling", "binding", "promoter", "domain", "receptor", "pathway"];
const DISEASE_WORDS: [&str; 8] = ["patients", "symptoms", "clinical", "chronic", "therapy", "severe", "cohort", "incidence"];

/// Concept tokens of the two [`synthetic_pubtator`] clusters.
pub fn synthetic_pubtator_clusters() -> [Vec<String>; 2] {
    [
        GENE_MENTIONS.iter().map(|(_, id)| make_concept_token(ConceptType::Gene, id)).collect(),
        DISEASE_MENTIONS.iter().map(|(_, id)| make_concept_token(ConceptType::Disease, id)).collect(),
    ]
}

/// PubTator text of `n_docs` documents with two topical clusters and exact
/// character offsets.
pub fn synthetic_pubtator(n_docs: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for d in 0..n_docs {
        let (mentions, words, ty) = if d % 2 == 0 {
            (&GENE_MENTIONS, &GENE_WORDS, ConceptType::Gene)
        } else {
            (&DISEASE_MENTIONS, &DISEASE_WORDS, ConceptType::Disease)
        };
        let doc_id = 10_000 + d;
        let mut pieces: Vec<Vec<(String, Option<&str>)>> = Vec::new();
        for len in [6usize, 30] {
            let part = (0..len)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        let (m, id) = mentions.choose(&mut rng).unwrap();
                        (m.to_string(), Some(*id))
                    } else if rng.random_bool(0.2) {
                        (SHARED_WORDS.choose(&mut rng).unwrap().to_string(), None)
                    } else {
                        (words.choose(&mut rng).unwrap().to_string(), None)
                    }
                })
                .collect();
            pieces.push(part);
        }
        let join = |p: &[(String, Option<&str>)]| p.iter().map(|w| w.0.as_str()).collect::<Vec<_>>().join(" ");
        let title = join(&pieces[0]);
        let abstract_text = format!("{}.", join(&pieces[1]));
        writeln!(out, "{doc_id}|t|{title}").unwrap();
        writeln!(out, "{doc_id}|a|{abstract_text}").unwrap();
        let mut offset = 0;
        for part in &pieces {
            for (word, id) in part {
                let len = word.chars().count();
                if let Some(id) = id {
                    writeln!(out, "{doc_id}\t{offset}\t{}\t{word}\t{ty}\t{id}", offset + len).unwrap();
                }
                offset += len + 1;
            }
        }
        out.push('\n');
    }
    out
}

/// Related sets drawn from one cluster; unrelated sets alternate between
/// the two clusters.
pub fn cluster_groups(clusters: &[Vec<String>; 2]) -> GroupDataset {
    let half = clusters[0].len().min(clusters[1].len()) / 2;
    let groups = (0..2)
        .map(|c| ConceptGroup {
            group_id: format!("cluster{c}"),
            related: clusters[c].clone(),
            unrelated: (0..half).flat_map(|i| [clusters[0][c * half + i].clone(), clusters[1][c * half + i].clone()]).collect(),
        })
        .collect();
    GroupDataset { name: "clusters".into(), groups, provenance: "synthetic".into() }
}

/// Pairs within a cluster are positive, pairs across clusters negative.
pub fn cluster_pairs(clusters: &[Vec<String>; 2]) -> Vec<PairInstance> {
    let all: Vec<(&String, usize)> = clusters.iter().enumerate().flat_map(|(c, m)| m.iter().map(move |t| (t, c))).collect();
    let mut out = Vec::new();
    for (i, (a, ca)) in all.iter().enumerate() {
        for (b, cb) in &all[i + 1..] {
            out.push(PairInstance { token_a: a.to_string(), token_b: b.to_string(), label: ca == cb });
        }
    }
    out
}

/// Two groups over six hand-set 3-d vectors.
pub fn toy_intrinsic() -> (Embedding, GroupDataset) {
    let tokens = ["Gene_1", "Gene_2", "Gene_3", "Gene_4", "Gene_5", "Gene_6"];
    #[rustfmt::skip]
    let vectors = vec![
        1.0, 0.1, 0.0,
        0.9, 0.2, 0.1,
        0.8, 0.0, 0.3,
        0.0, 1.0, 0.2,
        -0.2, 0.7, 0.9,
        0.1, -0.5, 1.0,
    ];
    let emb = Embedding::new(tokens.iter().map(|s| s.to_string()).collect(), vectors, 3).expect("valid toy embedding");
    let set = |ids: &[usize]| ids.iter().map(|&i| tokens[i].to_string()).collect::<Vec<_>>();
    let groups = vec![
        ConceptGroup { group_id: "g1".into(), related: set(&[0, 1, 2]), unrelated: set(&[3, 4, 5]) },
        ConceptGroup { group_id: "g2".into(), related: set(&[3, 4]), unrelated: set(&[0, 5]) },
    ];
    (emb, GroupDataset { name: "toy".into(), groups, provenance: "hand-built".into() })
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Protein embedding with `clusters` groups and a pair list whose positives
/// are exactly the pairs with cosine above `threshold`. Half the sampled
/// pairs come from within a cluster.
pub fn planted_ppi(
    proteins: usize,
    clusters: usize,
    dim: usize,
    pairs: usize,
    threshold: f64,
    seed: u64,
) -> (Embedding, Vec<PairInstance>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..clusters).map(|_| random_unit(dim, &mut rng)).collect();
    let mut tokens = Vec::with_capacity(proteins);
    let mut vectors = Vec::with_capacity(proteins * dim);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); clusters];
    for p in 0..proteins {
        let c = p % clusters;
        members[c].push(p);
        tokens.push(make_concept_token(ConceptType::Gene, &format!("P{p}")));
        vectors.extend(centers[c].iter().map(|x| (x + 0.35 * gaussian(&mut rng) / (dim as f64).sqrt()) as f32));
    }
    let emb = Embedding::new(tokens.clone(), vectors, dim).expect("finite planted vectors");
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(pairs);
    while out.len() < pairs {
        let a = rng.random_range(0..proteins);
        let b = if out.len() % 2 == 0 {
            *members[a % clusters].choose(&mut rng).unwrap()
        } else {
            rng.random_range(0..proteins)
        };
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        let cos = cosine(emb.row(a), emb.row(b)).expect("non-zero vectors");
        out.push(PairInstance { token_a: tokens[a].clone(), token_b: tokens[b].clone(), label: cos > threshold });
    }
    (emb, out)
}

/// Same pairs with labels permuted by seed.
pub fn shuffle_labels(pairs: &[PairInstance], seed: u64) -> Vec<PairInstance> {
    let mut labels: Vec<bool> = pairs.iter().map(|p| p.label).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    pairs.iter().zip(labels).map(|(p, label)| PairInstance { label, ..p.clone() }).collect()
}

/// Keyword token whose presence fixes a positive DDI type.
pub fn ddi_keyword(label: DdiLabel) -> Option<String> {
    label.is_positive().then(|| format!("kw_{}", label.as_str()))
}

/// Sentences in which the label is determined by a planted keyword; half
/// are negative and carry no keyword. Returns the embedding, a training
/// set and a test set.
pub fn planted_ddi(train: usize, test: usize, dim: usize, seed: u64) -> (Embedding, Vec<DdiInstance>, Vec<DdiInstance>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fillers: Vec<String> = (0..12).map(|i| format!("word{i}")).collect();
    let drugs: Vec<String> = (0..12).map(|i| make_concept_token(ConceptType::Chemical, &format!("MESH:D9{i:04}"))).collect();
    let keywords: Vec<String> = DdiLabel::POSITIVE.iter().filter_map(|&l| ddi_keyword(l)).collect();
    let tokens: Vec<String> = fillers.iter().chain(&drugs).chain(&keywords).cloned().collect();
    let vectors: Vec<f32> = tokens.iter().flat_map(|_| random_unit(dim, &mut rng)).map(|x| x as f32).collect();
    let emb = Embedding::new(tokens, vectors, dim).expect("finite planted vectors");
    let mut make = |n: usize| -> Vec<DdiInstance> {
        (0..n)
            .map(|_| {
                let label = if rng.random_bool(0.5) { DdiLabel::Negative } else { *DdiLabel::POSITIVE.choose(&mut rng).unwrap() };
                let pair: Vec<&String> = drugs.choose_multiple(&mut rng, 2).collect();
                let mut sentence: Vec<String> = vec![pair[0].clone(), pair[1].clone()];
                sentence.extend(ddi_keyword(label));
                while sentence.len() < 8 {
                    sentence.push(fillers.choose(&mut rng).unwrap().clone());
                }
                sentence.shuffle(&mut rng);
                DdiInstance { tokens: sentence, drug_a: pair[0].clone(), drug_b: pair[1].clone(), label }
            })
            .collect()
    };
    let train_set = make(train);
    let test_set = make(test);
    (emb, train_set, test_set)
}
