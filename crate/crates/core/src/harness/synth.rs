//! Synthetic review corpora with controlled per-location rates, and a
//! claim grid covering every claim type.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const COMPLAINT: &str = "Identify whether the {text} is a complaint about poor service quality";
pub const MENTIONS_SERVICE: &str = "The {text} mentions the service at the restaurant";
pub const PRAISE: &str = "Identify whether the {text} praises or speaks positively about the service at the restaurant";

const COMPLAINTS: &[&str] = &[
    "The staff was rude.",
    "Service was slow tonight.",
    "We waited forever for the server.",
    "The cashier ignored us.",
    "Rude waiter again.",
    "My order arrived as cold food.",
    "Slow staff at the drive thru.",
];

const PRAISES: &[&str] = &[
    "Friendly staff here.",
    "Quick service today.",
    "Helpful cashier at the counter.",
    "Attentive server all night.",
    "The friendly waiter smiled.",
];

const MENTIONS: &[&str] = &[
    "The cashier took our order.",
    "Our server brought napkins.",
    "Staff cleaned the tables.",
    "The waitress refilled drinks.",
];

const NEUTRAL: &[&str] = &[
    "The fries were hot and salty.",
    "I had a burger and a shake.",
    "Parking was easy.",
    "The nuggets tasted fine.",
    "Prices seemed fair for lunch.",
    "The dining room was clean.",
    "Ketchup packets were plentiful.",
    "The milkshake machine worked.",
];

/// Per-location phenomenon rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupProfile {
    pub business_id: String,
    pub reviews: usize,
    pub complaint: f64,
    pub praise: f64,
    pub mention: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub groups: Vec<GroupProfile>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let g = |id: &str, reviews, complaint, praise, mention| GroupProfile {
            business_id: id.to_string(),
            reviews,
            complaint,
            praise,
            mention,
        };
        Self {
            seed: 7,
            groups: vec![
                g("[A]", 48, 0.10, 0.60, 0.30),
                g("[B]", 40, 0.50, 0.10, 0.30),
                g("[C]", 36, 0.00, 0.40, 0.50),
                g("[D]", 30, 1.00, 0.00, 0.20),
                g("[E]", 44, 0.30, 0.30, 0.30),
                g("[F]", 32, 0.05, 0.05, 0.90),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub business_id: String,
    pub stars: i64,
    pub text: String,
}

pub fn generate(cfg: &SynthConfig) -> Vec<Review> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for g in &cfg.groups {
        for _ in 0..g.reviews {
            let mut sentences: Vec<&str> = Vec::new();
            let complains = rng.random_bool(g.complaint.clamp(0.0, 1.0));
            let praises = !complains && rng.random_bool(g.praise.clamp(0.0, 1.0));
            if complains {
                sentences.push(COMPLAINTS.choose(&mut rng).unwrap());
            }
            if praises {
                sentences.push(PRAISES.choose(&mut rng).unwrap());
            }
            if rng.random_bool(g.mention.clamp(0.0, 1.0)) {
                sentences.push(MENTIONS.choose(&mut rng).unwrap());
            }
            let fillers = rng.random_range(1..=2);
            for s in NEUTRAL.choose_multiple(&mut rng, fillers) {
                sentences.push(s);
            }
            sentences.shuffle(&mut rng);
            let stars = if complains {
                rng.random_range(1..=3)
            } else if praises {
                rng.random_range(3..=5)
            } else {
                rng.random_range(2..=5)
            };
            out.push(Review {
                business_id: g.business_id.clone(),
                stars,
                text: sentences.join(" "),
            });
        }
    }
    out
}

pub fn to_jsonl(reviews: &[Review]) -> String {
    let mut s = String::new();
    for r in reviews {
        s.push_str(&serde_json::to_string(r).expect("reviews serialize"));
        s.push('\n');
    }
    s
}

pub const SCHEMA_JSON: &str = r#"[
  {"name": "business_id", "type": "categorical", "description": "Identifier of the reviewed location"},
  {"name": "stars", "type": "int", "description": "Star rating from 1 to 5"},
  {"name": "text", "type": "text", "description": "Review text written by the customer"}
]
"#;

/// Claim type, for per-type reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    Existential,
    Universal,
    Cardinal,
    Proportional,
    Ordinal,
    Nested,
}

/// A benchmark claim with the program a compiler should produce for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClaim {
    pub text: String,
    pub kind: ClaimKind,
    pub program: String,
    /// Filled in by the reference evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounded: Option<bool>,
}

fn map_prompt(template: &str, alias: &str) -> String {
    format!("df.map(prompt({template:?}, bool).alias({alias:?}))")
}

fn scoped(id: &str) -> String {
    format!(".filter(col(\"business_id\").eq({id:?}))")
}

/// Claims over the default corpus profile, half of them ungrounded.
/// Exact groundedness comes from evaluating each program in full.
pub fn claim_grid() -> Vec<SynthClaim> {
    let mut v = Vec::new();
    let mut push = |kind, text: String, program: String| {
        v.push(SynthClaim {
            text,
            kind,
            program,
            grounded: None,
        })
    };
    for (id, tmpl, what) in [
        ("[A]", COMPLAINT, "complains about poor service"),
        ("[B]", COMPLAINT, "complains about poor service"),
        ("[D]", COMPLAINT, "complains about poor service"),
        ("[C]", COMPLAINT, "complains about poor service"),
        ("[D]", PRAISE, "praises the service"),
        ("[E]", PRAISE, "praises the service"),
    ] {
        push(
            ClaimKind::Existential,
            format!("Some review of {id} {what}"),
            format!(
                "{}{}\n.aggregate([bool_or(col(\"c\")).alias(\"any\")])\n.check(col(\"any\"))",
                map_prompt(tmpl, "c"),
                scoped(id)
            ),
        );
    }
    for id in ["[D]", "[A]"] {
        push(
            ClaimKind::Universal,
            format!("Every review of {id} complains about poor service"),
            format!(
                "{}{}\n.aggregate([bool_and(col(\"c\")).alias(\"all\")])\n.check(col(\"all\"))",
                map_prompt(COMPLAINT, "c"),
                scoped(id)
            ),
        );
    }
    push(
        ClaimKind::Universal,
        "Every review of [C] avoids complaining about service".into(),
        format!(
            "{}{}\n.aggregate([bool_and(not col(\"c\")).alias(\"all\")])\n.check(col(\"all\"))",
            map_prompt(COMPLAINT, "c"),
            scoped("[C]")
        ),
    );
    push(
        ClaimKind::Universal,
        "Every review of [B] praises the service".into(),
        format!(
            "{}{}\n.aggregate([bool_and(col(\"p\")).alias(\"all\")])\n.check(col(\"all\"))",
            map_prompt(PRAISE, "p"),
            scoped("[B]")
        ),
    );
    for (k, op, phrase) in [
        (5, ">=", "At least 5"),
        (90, ">=", "At least 90"),
        (3, ">", "More than 3"),
        (50, "<", "Fewer than 50"),
        (20, "<=", "At most 20"),
    ] {
        push(
            ClaimKind::Cardinal,
            format!("{phrase} reviews complain about poor service"),
            format!(
                "{}\n.aggregate([count_if(col(\"c\")).alias(\"n\")])\n.check(col(\"n\") {op} {k})",
                map_prompt(COMPLAINT, "c")
            ),
        );
    }
    push(
        ClaimKind::Cardinal,
        "At least 10 reviews of [A] praise the service".into(),
        format!(
            "{}{}\n.aggregate([count_if(col(\"p\")).alias(\"n\")])\n.check(col(\"n\") >= 10)",
            map_prompt(PRAISE, "p"),
            scoped("[A]")
        ),
    );
    for (id, op, rho, phrase) in [
        ("[B]", ">", 0.3, "More than 30%"),
        ("[B]", ">", 0.8, "More than 80%"),
        ("[A]", ">=", 0.4, "At least 40%"),
        ("[C]", ">=", 0.5, "At least half"),
        ("[F]", "<", 0.5, "Fewer than half"),
        ("[D]", "<", 0.5, "Fewer than half"),
    ] {
        let (tmpl, what) = if id == "[A]" || id == "[C]" {
            (PRAISE, "praise the service")
        } else {
            (COMPLAINT, "complain about poor service")
        };
        push(
            ClaimKind::Proportional,
            format!("{phrase} of reviews of {id} {what}"),
            format!(
                "{}{}\n.aggregate([proportion(col(\"x\")).alias(\"p\")])\n.check(col(\"p\") {op} {rho})",
                map_prompt(tmpl, "x"),
                scoped(id)
            ),
        );
    }
    for (id, rank) in [("[A]", 1), ("[B]", 1), ("[C]", 2), ("[F]", 2)] {
        push(
            ClaimKind::Ordinal,
            format!("Location {id} ranks number {rank} in terms of service praise"),
            format!(
                "df.filter(prompt({MENTIONS_SERVICE:?}))\n.map(prompt({PRAISE:?}, bool).alias(\"praises_service\"))\n\
                 .aggregate([proportion(col(\"praises_service\")).alias(\"service_praise_prop\")], group_by=[col(\"business_id\")])\n\
                 .with_rank(col(\"service_praise_prop\"))\n.filter(col(\"business_id\").eq({id:?}))\n.check(col(\"rank\").eq({rank}))"
            ),
        );
    }
    push(
        ClaimKind::Ordinal,
        "Location [D] has the most service complaints".into(),
        format!(
            "{}\n.aggregate([count_if(col(\"c\")).alias(\"n\")], group_by=[col(\"business_id\")])\n\
             .with_rank(col(\"n\"))\n.filter(col(\"business_id\").eq(\"[D]\"))\n.check(col(\"rank\").eq(1))",
            map_prompt(COMPLAINT, "c")
        ),
    );
    let nested = |outer: &str, inner: &str, check: &str| {
        format!(
            "{}\n.aggregate([{inner}.alias(\"inner\")], group_by=[col(\"business_id\")])\n\
             .aggregate([{outer}.alias(\"outer\")])\n.check({check})",
            map_prompt(COMPLAINT, "c")
        )
    };
    push(
        ClaimKind::Nested,
        "All locations have multiple complaints about poor service quality".into(),
        nested("bool_and(col(\"inner\") >= 2)", "count_if(col(\"c\"))", "col(\"outer\")"),
    );
    push(
        ClaimKind::Nested,
        "Some location has at least one complaint about poor service quality".into(),
        nested("bool_or(col(\"inner\") >= 1)", "count_if(col(\"c\"))", "col(\"outer\")"),
    );
    push(
        ClaimKind::Nested,
        "Some location has complaints in more than 90% of reviews".into(),
        nested("bool_or(col(\"inner\") > 0.9)", "proportion(col(\"c\"))", "col(\"outer\")"),
    );
    push(
        ClaimKind::Nested,
        "At least 6 locations have a complaint about poor service".into(),
        nested("count_if(col(\"inner\") >= 1)", "count_if(col(\"c\"))", "col(\"outer\") >= 6"),
    );
    push(
        ClaimKind::Nested,
        "Every location has fewer than 10 complaints".into(),
        nested("bool_and(col(\"inner\") < 10)", "count_if(col(\"c\"))", "col(\"outer\")"),
    );
    v
}
