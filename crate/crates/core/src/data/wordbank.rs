//! Fixed vocabulary for the synthetic assessment-text generator.
//!
//! Texts are assembled from these banks so that a handful of designated
//! keywords carry the text signal while everything else is neutral filler.
//! Filler sentences deliberately avoid the keyword stems and the negation
//! words, which are reserved for the signal-bearing sentences.

/// A keyword sentence that fires when the latent text signal crosses a threshold.
#[derive(Debug, Clone, Copy)]
pub struct KeywordRule {
    /// The signal-bearing word inside the sentence.
    pub word: &'static str,
    pub sentence: &'static str,
    /// Threshold on the standardized text signal t.
    pub threshold: f64,
    /// Fire when t > threshold (risk side) if true, when t < threshold if false.
    pub above: bool,
    /// Only emitted in long-form documents.
    pub long_only: bool,
}

impl KeywordRule {
    pub fn fires(&self, t: f64, long_form: bool) -> bool {
        if self.long_only && !long_form {
            return false;
        }
        if self.above {
            t > self.threshold
        } else {
            t < self.threshold
        }
    }
}

/// Risk keyword used by the explanation acceptance checks.
pub const PLANTED_RISK_KEYWORD: &str = "informal";

pub const KEYWORD_RULES: &[KeywordRule] = &[
    KeywordRule {
        word: "informal",
        sentence: "the stall operates from an informal roadside structure",
        threshold: 0.6,
        above: true,
        long_only: false,
    },
    KeywordRule {
        word: "overdue",
        sentence: "several overdue balances remain with the main suppliers",
        threshold: 1.4,
        above: true,
        long_only: false,
    },
    KeywordRule {
        word: "diversified",
        sentence: "income sources are diversified across the trading seasons",
        threshold: -0.6,
        above: false,
        long_only: false,
    },
    KeywordRule {
        word: "surplus",
        sentence: "the monthly surplus comfortably covers the proposed installment",
        threshold: -1.4,
        above: false,
        long_only: false,
    },
    KeywordRule {
        word: "delayed",
        sentence: "payments to the wholesale depot were delayed twice last quarter",
        threshold: 0.45,
        above: true,
        long_only: true,
    },
    KeywordRule {
        word: "savings",
        sentence: "a savings balance is maintained at the village cooperative",
        threshold: -0.45,
        above: false,
        long_only: true,
    },
];

/// Threshold on t for the arrears-history sentence polarity.
pub const ARREARS_THRESHOLD: f64 = 0.2;
/// Emitted when t > threshold. Differs from the safe variant only by "no",
/// which document-frequency pruning removes from bag-of-words vocabularies;
/// sequence models still see it.
pub const ARREARS_RISK_SENTENCE: &str = "the client has previous arrears with another lender";
pub const ARREARS_SAFE_SENTENCE: &str = "the client has no previous arrears with another lender";

/// Industry levels: (token, sampling probability, latent score, intro phrase).
/// Scores are re-centred to probability-weighted zero mean at generation time.
pub const INDUSTRIES: &[(&str, f64, f64, &str)] = &[
    ("farming", 0.22, -0.55, "smallholder mixed farm"),
    ("retail_trade", 0.20, -0.10, "general retail shop"),
    ("services", 0.15, 0.00, "neighbourhood service business"),
    ("food_trade", 0.12, 0.05, "cooked food stall"),
    ("transport", 0.10, 0.20, "motorcycle taxi operation"),
    ("manufacturing", 0.08, 0.10, "small furniture workshop"),
    ("tailoring", 0.07, 0.30, "tailoring and dressmaking shop"),
    ("construction", 0.06, 0.60, "building materials yard"),
];

/// Region levels: (token, sampling probability, latent score, display form).
pub const REGIONS: &[(&str, f64, f64, &str)] = &[
    ("riverside", 0.25, -0.15, "riverside"),
    ("hillside", 0.22, 0.10, "hillside"),
    ("station_road", 0.20, 0.15, "station road"),
    ("lakeshore", 0.18, -0.05, "lakeshore"),
    ("old_market", 0.15, 0.00, "old market"),
];

/// Intro sentence templates; {phrase} and {region} are substituted.
pub const INTRO_TEMPLATES: &[&str] = &[
    "the business is a {phrase} on the {region} side of town",
    "the applicant runs a {phrase} near the {region} market",
    "this file concerns a {phrase} trading in the {region} area",
];

/// Neutral filler sentences. None of them contain the keywords above, their
/// close stems, or the words "no" / "not".
pub const FILLER_SENTENCES: &[&str] = &[
    "stock is bought twice a week from the central wholesale depot",
    "shelves hold flour sugar cooking oil and packaged tea",
    "inventory records are kept in a ruled exercise book",
    "fast moving items sell out before the weekend rush",
    "spoilage stays low because orders match daily demand",
    "regular customers collect their orders on market day mornings",
    "most buyers pay cash while a few settle weekly",
    "foot traffic peaks in the late afternoon hours",
    "a loyal customer base has grown through word of mouth",
    "school children stop by for snacks after classes",
    "the spouse helps with weighing and packing goods",
    "two relatives assist during the harvest season",
    "household expenses are kept separate from the till",
    "children attend the nearby primary school during trading hours",
    "the premises are rented under a yearly renewable agreement",
    "a corrugated roof was replaced before the rains",
    "the workshop sits beside a busy junction",
    "lighting comes from a shared generator in the evenings",
    "a storage room at the back holds extra cartons",
    "sales dip during the long rains and recover quickly",
    "the dry season brings steady demand for drinking water",
    "harvest months bring more cash into the village",
    "goods arrive by minibus from the regional depot",
    "a hired motorcycle delivers parcels to nearby villages",
    "transport costs rose slightly after the fuel price change",
    "daily takings are recorded each evening after closing",
    "receipts are filed in a folder by month",
    "the till is reconciled against the notebook every friday",
    "one assistant works the counter on busy days",
    "wages are paid at the end of each month",
    "the owner trained the helper to handle weighing",
    "prices follow the wholesale market with a steady markup",
    "two similar shops operate within walking distance",
    "bulk discounts attract customers from neighbouring streets",
    "the trading licence is renewed every january at the council office",
    "electricity tokens are topped up twice a month",
    "the owner belongs to a local traders association",
    "weekly meetings rotate among member households",
    "a chest freezer was purchased second hand last year",
    "the sewing machines are serviced by a technician in town",
    "spare parts are sourced from the main street dealers",
    "the requested amount will expand the product range",
    "the officer visited the site on a tuesday morning",
    "repayment will come from weekly sales proceeds",
    "the applicant presented national identity documents at the branch",
    "a guarantor from the same village signed the form",
    "the loan committee reviewed the file during the monthly session",
    "water is fetched from a communal tap across the road",
    "the veranda displays fresh produce in woven baskets",
    "charcoal braziers are stacked near the entrance",
    "mobile money transfers cover most supplier invoices",
    "the village chief confirmed the residence during the visit",
    "rainfall patterns shape the planting calendar here",
    "maize and beans rotate across the two plots",
    "a borehole project brought reliable water to the area",
    "the market stalls open before sunrise on wednesdays",
    "secondhand clothes arrive in bales from the port city",
    "the barber chair was imported through a cousin abroad",
    "airtime vouchers and phone accessories sell steadily",
    "the poultry run houses layers and a few broilers",
    "feed costs track the maize harvest cycle",
    "milk is delivered to the cooling plant each dawn",
    "the tailor takes school uniform orders in bulk each term",
    "bricks are moulded on site and dried in the sun",
    "sand and cement are stored under a tarpaulin",
    "the carpentry bench occupies half the shed",
    "timber offcuts are sold as firewood bundles",
    "fish is smoked overnight and packed before the morning run",
    "the canoe engine was overhauled two seasons ago",
    "vegetables are watered from a drip line along the ridge",
    "seedlings are raised in trays behind the house",
    "the pharmacy shelf stocks basic remedies and bandages",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities_sum_to_one() {
        let p_ind: f64 = INDUSTRIES.iter().map(|(_, p, _, _)| p).sum();
        let p_reg: f64 = REGIONS.iter().map(|(_, p, _, _)| p).sum();
        assert!((p_ind - 1.0).abs() < 1e-12);
        assert!((p_reg - 1.0).abs() < 1e-12);
    }

    #[test]
    fn filler_avoids_reserved_words() {
        let reserved = [
            "no", "not", "informal", "overdue", "diversified", "surplus", "delayed", "savings",
            "arrears", "previous",
        ];
        for sentence in FILLER_SENTENCES.iter().chain(INTRO_TEMPLATES) {
            for word in sentence.split_whitespace() {
                assert!(
                    !reserved.contains(&word),
                    "reserved word {word:?} in filler: {sentence:?}"
                );
            }
        }
    }

    #[test]
    fn keyword_rules_contain_their_keyword() {
        for rule in KEYWORD_RULES {
            assert!(
                rule.sentence.split_whitespace().any(|w| w == rule.word),
                "sentence for {:?} lacks the keyword",
                rule.word
            );
        }
        assert!(KEYWORD_RULES.iter().any(|r| r.word == PLANTED_RISK_KEYWORD));
    }

    #[test]
    fn arrears_pair_differs_only_by_negation() {
        let risk: Vec<&str> = ARREARS_RISK_SENTENCE.split_whitespace().collect();
        let safe: Vec<&str> = ARREARS_SAFE_SENTENCE.split_whitespace().collect();
        assert_eq!(safe.len(), risk.len() + 1);
        let filtered: Vec<&str> = safe.iter().copied().filter(|&w| w != "no").collect();
        assert_eq!(filtered, risk);
    }
}
