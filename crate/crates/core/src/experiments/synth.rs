//! Seeded synthetic reference corpus: clinical-looking items with templated
//! correct/incorrect response families and paraphrase noise, plus the
//! standard gaming-generation recipe over it. Everything is a pure function
//! of the seed, so pipeline checks are reproducible without any private data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, GoldLabel, Item, Provenance, Response};
use crate::gaming::{
    gen_s1_consecutive, gen_s1_medical, gen_s1_nonconsecutive, gen_s2_summary, gen_s3_mixed,
    GeneratorConfig, Lexicons,
};
use crate::text;

/// Shape of the generated corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_items: usize,
    pub responses_per_item: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { seed: 42, n_items: 20, responses_per_item: 60 }
    }
}

/// Per-item gaming generation counts for the standard recipe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GamingRecipe {
    pub seed: u64,
    pub s1a_per_item: usize,
    pub s1b_per_item: usize,
    pub s1c_per_item: usize,
    /// Word-count bounds for the stem-sampling strategies.
    pub k_min: usize,
    pub k_max: usize,
    /// One extractive summary per listed sentence count.
    pub summary_counts: Vec<usize>,
    pub s3_per_item: usize,
    /// Incorrect answers per mixed response ("list as many plausible answers
    /// as possible").
    pub s3_incorrect_parts: usize,
    /// Connective phrase between the listed answers.
    pub s3_separator: String,
}

impl Default for GamingRecipe {
    fn default() -> Self {
        Self {
            seed: 42,
            s1a_per_item: 12,
            s1b_per_item: 12,
            s1c_per_item: 8,
            k_min: 2,
            k_max: 9,
            summary_counts: vec![1, 2, 3],
            s3_per_item: 14,
            s3_incorrect_parts: 2,
            s3_separator: " or possibly it could be ".to_string(),
        }
    }
}

/// (primary diagnosis, acceptable synonym) pairs the items cycle through.
const CONDITIONS: &[(&str, &str)] = &[
    ("guillain barre syndrome", "acute immune mediated polyneuropathy"),
    ("pulmonary embolism", "embolic obstruction of the lung vessels"),
    ("myasthenia gravis", "autoimmune neuromuscular junction disorder"),
    ("bacterial meningitis", "acute bacterial infection of the meninges"),
    ("diabetic ketoacidosis", "acute diabetic metabolic crisis"),
    ("iron deficiency anemia", "microcytic anemia from iron loss"),
    ("acute pancreatitis", "acute inflammation of the pancreas"),
    ("rheumatoid arthritis", "chronic inflammatory joint disease"),
    ("multiple sclerosis", "demyelinating disease of the central nervous system"),
    ("nephrotic syndrome", "protein losing glomerular disorder"),
    ("aortic dissection", "tear of the aortic wall"),
    ("ulcerative colitis", "chronic ulcerating inflammation of the colon"),
    ("pernicious anemia", "vitamin b12 deficiency anemia"),
    ("hyperthyroidism", "overactive thyroid state"),
    ("acute pericarditis", "inflammation of the pericardial sac"),
    ("acute appendicitis", "inflamed appendix"),
    ("hepatic cirrhosis", "chronic scarring of the liver"),
    ("sarcoidosis", "granulomatous multisystem disease"),
    ("infective endocarditis", "bacterial infection of the heart valves"),
    ("osteomyelitis", "infection of the bone"),
    ("pyelonephritis", "bacterial infection of the kidney"),
    ("tension pneumothorax", "collapsed lung under pressure"),
    ("hemochromatosis", "iron overload disorder"),
    ("polymyalgia rheumatica", "inflammatory pain of the shoulder girdle"),
];

/// Symptom vocabulary; drawn from the bundled medical-term lexicon so the
/// lexicon-restricted gaming generator always has material.
const SYMPTOMS: &[&str] = &[
    "fever", "cough", "weakness", "fatigue", "nausea", "vomiting", "diarrhea", "headache",
    "dizziness", "palpitations", "dyspnea", "tachycardia", "hypotension", "rash", "edema",
    "jaundice", "pallor", "syncope", "tremor", "numbness", "tingling", "chills", "sweats",
    "wheezing", "myalgia", "arthralgia", "confusion", "lethargy", "pruritus", "photophobia",
];

const FINDINGS: &[&str] = &[
    "absent reflexes", "diffuse weakness", "decreased sensation", "abdominal tenderness",
    "marked pallor", "pitting edema", "an irregular pulse", "neck stiffness",
    "scattered wheezing", "mild confusion",
];

const TRIGGERS: &[&str] = &[
    "a recent viral illness",
    "an upper respiratory infection",
    "a long airplane flight",
    "starting a new medication",
    "a strenuous hiking trip",
    "a routine dental procedure",
];

const FILLERS: &[&str] = &["possibly", "likely", "acute", "presentation", "overall", "course"];

const VAGUE: &[&str] = &[
    "some kind of infection",
    "a heart problem",
    "a neurological issue",
    "an autoimmune condition",
    "a metabolic problem",
];

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

fn pick_distinct<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], n: usize) -> Vec<&'a str> {
    let picks = rand::seq::index::sample(rng, pool.len(), n.min(pool.len()));
    picks.iter().map(|i| pool[i]).collect()
}

struct ItemPlan {
    item: Item,
    primary: &'static str,
    synonym: &'static str,
    distractors: [&'static str; 2],
    hallmarks: Vec<&'static str>,
    findings: Vec<&'static str>,
}

fn build_item(seed: u64, index: usize) -> ItemPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(text::derive_seed(seed, &format!("item:{index}")));
    let (primary, synonym) = CONDITIONS[index % CONDITIONS.len()];
    let distractors = [
        CONDITIONS[(index + 7) % CONDITIONS.len()].0,
        CONDITIONS[(index + 13) % CONDITIONS.len()].0,
    ];
    let hallmarks = pick_distinct(&mut rng, SYMPTOMS, 3);
    let findings = pick_distinct(&mut rng, FINDINGS, 3);
    let extra = pick_distinct(&mut rng, SYMPTOMS, 6);
    let age = rng.random_range(18..85);
    let days = rng.random_range(1..14);
    let pulse = rng.random_range(58..135);
    let sat = rng.random_range(88..100);
    let bp_hi = rng.random_range(96..165);
    let bp_lo = rng.random_range(52..95);
    let sex = if rng.random_range(0..2) == 0 { "man" } else { "woman" };

    let stem = format!(
        "A previously healthy {age} year old {sex} presents to the emergency department with {h0} and {h1} for {days} days. \
         The symptoms began after {trigger}. \
         The patient denies any {x0} or {x1} but describes intermittent {x2} during the preceding month. \
         Medical history is notable only for seasonal allergies and a remote appendectomy. \
         Examination shows {f0} and {f1} together with {f2}. \
         Temperature is 37.{dec} degrees, pulse is {pulse} per minute, and blood pressure is {bp_hi} over {bp_lo}. \
         Pulse oximetry on room air shows an oxygen saturation of {sat} percent. \
         Laboratory studies reveal mild leukocytosis with an elevated sedimentation rate. \
         The patient reports worsening {h2} and {h0} over the past week despite rest and hydration.",
        age = age,
        sex = sex,
        h0 = hallmarks[0],
        h1 = hallmarks[1],
        h2 = hallmarks[2],
        x0 = extra[0],
        x1 = extra[1],
        x2 = extra[2],
        days = days,
        trigger = pick(&mut rng, TRIGGERS),
        f0 = findings[0],
        f1 = findings[1],
        f2 = findings[2],
        dec = rng.random_range(0..9),
        pulse = pulse,
        sat = sat,
        bp_hi = bp_hi,
        bp_lo = bp_lo,
    );

    let item = Item {
        item_id: format!("synth{index:02}"),
        stem,
        lead_in: "What is the most likely diagnosis?".to_string(),
        correct_answers: vec![primary.to_string(), synonym.to_string()],
    };
    ItemPlan { item, primary, synonym, distractors, hallmarks, findings }
}

/// Apply light paraphrase noise: occasionally append a filler token or drop
/// the last word.
fn add_noise(rng: &mut ChaCha8Rng, mut text: String) -> String {
    if rng.random_range(0..100) < 25 {
        text.push(' ');
        text.push_str(pick(rng, FILLERS));
    }
    if rng.random_range(0..100) < 15 {
        let words: Vec<&str> = text.split(' ').collect();
        if words.len() > 3 {
            text = words[..words.len() - 1].join(" ");
        }
    }
    text
}

fn direct_answer(rng: &mut ChaCha8Rng, answer: &str) -> String {
    match rng.random_range(0..6) {
        0 => answer.to_string(),
        1 => format!("i think this is {answer}"),
        2 => format!("most likely {answer}"),
        3 => format!("{answer} likely"),
        4 => format!("the diagnosis is {answer}"),
        _ => format!("probably {answer}"),
    }
}

fn stem_echo(rng: &mut ChaCha8Rng, plan: &ItemPlan, answer: &str) -> String {
    let h0 = plan.hallmarks[0];
    let h1 = plan.hallmarks[1];
    let f0 = plan.findings[0];
    match rng.random_range(0..3) {
        0 => format!("patient with {h0} and {h1} likely has {answer}"),
        1 => format!("{h0} and {h1} with {f0} suggest {answer}"),
        _ => format!("given the {h0} and {f0} this is {answer}"),
    }
}

fn build_responses(seed: u64, plan: &ItemPlan, total: usize) -> Vec<Response> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(text::derive_seed(seed, &format!("responses:{}", plan.item.item_id)));
    let n_correct = (total as f64 * 0.55).round() as usize;
    let mut responses = Vec::with_capacity(total);

    for j in 0..total {
        let correct = j < n_correct;
        let text = if correct {
            let answer = if rng.random_range(0..100) < 70 { plan.primary } else { plan.synonym };
            match rng.random_range(0..100) {
                0..=49 => direct_answer(&mut rng, answer),
                50..=89 => stem_echo(&mut rng, plan, answer),
                _ => {
                    // Heavily corrupted but still creditable answer: one
                    // content token survives.
                    let token = plan.primary.split(' ').next().unwrap_or(plan.primary);
                    format!("{} {} maybe", pick(&mut rng, FILLERS), token)
                }
            }
        } else {
            let distractor = plan.distractors[rng.random_range(0..plan.distractors.len())];
            match rng.random_range(0..100) {
                0..=54 => direct_answer(&mut rng, distractor),
                55..=79 => stem_echo(&mut rng, plan, distractor),
                _ => pick(&mut rng, VAGUE).to_string(),
            }
        };
        let text = add_noise(&mut rng, text);
        responses.push(Response {
            response_id: format!("{}:r{j:03}", plan.item.item_id),
            item_id: plan.item.item_id.clone(),
            text,
            gold_label: if correct { GoldLabel::Correct } else { GoldLabel::Incorrect },
            provenance: Provenance::Real,
        });
    }
    responses
}

/// Build the seeded reference corpus.
pub fn reference_corpus(cfg: &SynthConfig) -> Corpus {
    let mut items = Vec::with_capacity(cfg.n_items);
    let mut responses = Vec::new();
    for index in 0..cfg.n_items {
        let plan = build_item(cfg.seed, index);
        responses.extend(build_responses(cfg.seed, &plan, cfg.responses_per_item));
        items.push(plan.item);
    }
    Corpus::new(items, responses).expect("synthetic corpus satisfies the data model")
}

/// Generate the standard gaming pools over a corpus: the three stem-sampling
/// variants, extractive summaries at several lengths, and mixed responses
/// built from each item's real incorrect answers.
pub fn reference_gaming(corpus: &Corpus, recipe: &GamingRecipe) -> (Vec<Response>, Vec<String>) {
    let lexicons = Lexicons::builtin();
    let base = GeneratorConfig {
        seed: recipe.seed,
        k_min: recipe.k_min,
        k_max: recipe.k_max,
        ..Default::default()
    };
    let mut responses = Vec::new();
    let mut warnings = Vec::new();

    for item in &corpus.items {
        let mut out = gen_s1_nonconsecutive(item, &base, &lexicons, recipe.s1a_per_item);
        responses.append(&mut out.responses);
        warnings.append(&mut out.warnings);

        let mut out = gen_s1_consecutive(item, &base, recipe.s1b_per_item);
        responses.append(&mut out.responses);
        warnings.append(&mut out.warnings);

        let mut out = gen_s1_medical(item, &base, &lexicons, recipe.s1c_per_item);
        responses.append(&mut out.responses);
        warnings.append(&mut out.warnings);

        for &count in &recipe.summary_counts {
            let cfg = GeneratorConfig { summary_sentence_count: count, ..base.clone() };
            match gen_s2_summary(item, &cfg, &lexicons) {
                Ok(summary) => responses.push(summary),
                Err(e) => warnings.push(e.to_string()),
            }
        }

        let incorrect_pool: Vec<Response> = corpus
            .responses
            .iter()
            .filter(|r| {
                r.item_id == item.item_id
                    && r.provenance == Provenance::Real
                    && r.gold_label == GoldLabel::Incorrect
            })
            .cloned()
            .collect();
        let s3_cfg = GeneratorConfig {
            mixed_incorrect_parts: recipe.s3_incorrect_parts,
            mixed_separator: recipe.s3_separator.clone(),
            ..base.clone()
        };
        let mut out = gen_s3_mixed(item, &incorrect_pool, &s3_cfg, recipe.s3_per_item);
        responses.append(&mut out.responses);
        warnings.append(&mut out.warnings);
    }
    (responses, warnings)
}
