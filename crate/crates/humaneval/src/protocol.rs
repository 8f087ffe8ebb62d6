//! Study protocols: rating dimensions, the five-point scale and the flag list.
//!
//! Question and option texts are reproduced verbatim so a front end can
//! render them without its own copy.

use serde::{Deserialize, Serialize};

/// Which rendering the candidates are judged on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    FaceDyadic,
    BodyDyadic,
}

/// Labels of the scale values −2..=2 in order.
pub const SCALE_LABELS: [&str; 5] = ["Much prefer A", "Slightly prefer A", "Tie", "Slightly prefer B", "Much prefer B"];

/// Lowest and highest admissible rating.
pub const SCALE_MIN: i8 = -2;
pub const SCALE_MAX: i8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Overall,
    Listening,
    Speaking,
}

/// One question of a protocol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Dimension {
    /// 1-based question number.
    pub id: u8,
    pub key: &'static str,
    pub section: Section,
    pub question: &'static str,
    /// Option labels for values −2..=2.
    pub options: [&'static str; 5],
}

const LIFELIKE: [&str; 5] = [
    "Candidate A is much more lifelike",
    "Candidate A is slightly more lifelike",
    "Tie",
    "Candidate B is slightly more lifelike",
    "Candidate B is much more lifelike",
];

const INTENT: [&str; 5] = [
    "Candidate A appears to be much more intentional",
    "Candidate A appears to be slightly more intentional",
    "Tie",
    "Candidate B appears to be slightly more intentional",
    "Candidate B appears to be much more intentional",
];

const TURN_TAKING: [&str; 5] = [
    "Candidate A appears to have much better turn-taking behavior",
    "Candidate A appears to have slightly better turn-taking behavior",
    "Tie",
    "Candidate B appears to have slightly better turn-taking behavior",
    "Candidate B appears to have much better turn-taking behavior",
];

const BETTER: [&str; 5] = [
    "Candidate A appears to be much better",
    "Candidate A appears to be slightly better",
    "Tie",
    "Candidate B appears to be slightly better",
    "Candidate B appears to be much better",
];

const fn dim(id: u8, key: &'static str, section: Section, question: &'static str, options: [&'static str; 5]) -> Dimension {
    Dimension { id, key, section, question, options }
}

static BODY: [Dimension; 10] = [
    dim(1, "lifelike", Section::Overall, "Overall, which candidate’s (A or B) visual behaviors are more lifelike?", LIFELIKE),
    dim(2, "intent", Section::Overall, "Which candidate (A or B) most clearly demonstrates an intent with their visual behaviors?", INTENT),
    dim(3, "turn_taking", Section::Overall, "Which candidate (A or B) appears to have better turn-taking behavior?", TURN_TAKING),
    dim(4, "listening_attentive", Section::Listening, "While listening, which Candidate displayed more attentive listening behavior?", SCALE_LABELS),
    dim(5, "listening_believable", Section::Listening, "While listening, which Candidate’s behaviors were more physically believable?", SCALE_LABELS),
    dim(6, "listening_timing", Section::Listening, "While listening, which Candidate’s visual behaviors were better timed?", SCALE_LABELS),
    dim(7, "listening_appropriate", Section::Listening, "While listening, which Candidate’s behaviors where more appropriate to the discussed content?", SCALE_LABELS),
    dim(8, "speaking_believable", Section::Speaking, "While speaking, which Candidate’s behaviors were more physically believable?", SCALE_LABELS),
    dim(9, "speaking_timing", Section::Speaking, "While speaking, which Candidate’s visual behaviors were better timed?", SCALE_LABELS),
    dim(10, "speaking_appropriate", Section::Speaking, "While speaking, which Candidate’s behaviors were more appropriate to the content discussed?", SCALE_LABELS),
];

static FACE: [Dimension; 11] = [
    dim(1, "lifelike", Section::Overall, "Overall, which candidate (A or B) was more life-like?", LIFELIKE),
    dim(2, "face_eye_lip", Section::Overall, "Which candidate (A or B) had better facial expressions, eye movement, and lip movement?", BETTER),
    dim(3, "intent", Section::Overall, "Which candidate (A or B) most clearly demonstrated intent with their facial expressions?", INTENT),
    dim(4, "turn_taking", Section::Overall, "Which candidate (A or B) appears to have better turn-taking behavior?", TURN_TAKING),
    dim(5, "listening_attentive", Section::Listening, "While listening, which Candidate displayed more attentive listening head gestures and facial expressions?", SCALE_LABELS),
    dim(6, "listening_believable", Section::Listening, "While listening, which Candidate’s facial expressions and head gestures were more physically believable?", SCALE_LABELS),
    dim(7, "listening_timing", Section::Listening, "While listening, which Candidate’s facial expressions and head gestures were better timed?", SCALE_LABELS),
    dim(8, "listening_appropriate", Section::Listening, "While listening, which Candidate’s facial expressions and head gestures where more appropriate to the discussed content?", SCALE_LABELS),
    dim(9, "speaking_believable", Section::Speaking, "While speaking, which Candidate’s facial expressions and head gestures were more physically believable?", SCALE_LABELS),
    dim(10, "speaking_timing", Section::Speaking, "While speaking, which Candidate’s facial expressions and head gestures were better timed?", SCALE_LABELS),
    dim(11, "speaking_appropriate", Section::Speaking, "While speaking, which Candidate’s facial expressions and head gestures were more appropriate to the content discussed?", SCALE_LABELS),
];

impl Protocol {
    pub fn dimensions(self) -> &'static [Dimension] {
        match self {
            Self::FaceDyadic => &FACE,
            Self::BodyDyadic => &BODY,
        }
    }

    pub fn dimension(self, id: u8) -> Option<&'static Dimension> {
        self.dimensions().iter().find(|d| d.id == id)
    }
}

/// Reasons a rater can give for flagging and skipping an item.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagCategory {
    AudioDistorted,
    AudioOutOfSync,
    AudioCutOut,
    VideoFreezes,
    Lewd,
    Violent,
    HateSymbols,
    /// Requires a free-text justification.
    Other,
}

impl FlagCategory {
    pub const ALL: [FlagCategory; 8] = [
        Self::AudioDistorted,
        Self::AudioOutOfSync,
        Self::AudioCutOut,
        Self::VideoFreezes,
        Self::Lewd,
        Self::Violent,
        Self::HateSymbols,
        Self::Other,
    ];

    /// Checkbox label shown to raters.
    pub fn label(self) -> &'static str {
        match self {
            Self::AudioDistorted => "Audio is distorted",
            Self::AudioOutOfSync => "Audio is out of sync",
            Self::AudioCutOut => "Audio is cut out",
            Self::VideoFreezes => "Video freezes and/or skips",
            Self::Lewd => "Avatar displays gestures that could be interpreted as lewd/sexual",
            Self::Violent => "Avatar shows violent gestures or actions",
            Self::HateSymbols => "Avatar uses hate symbols or gestures associated with harmful ideologies",
            Self::Other => {
                "Other (Any other issue that impacts audio/video or makes the clip unsafe, uncomfortable, or inappropriate for evaluation)"
            }
        }
    }

    pub fn is_safety(self) -> bool {
        matches!(self, Self::Lewd | Self::Violent | Self::HateSymbols)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlagOption {
    pub id: FlagCategory,
    pub label: &'static str,
    pub requires_note: bool,
}

/// Everything a front end needs to render one protocol.
#[derive(Clone, Debug, Serialize)]
pub struct ProtocolSheet {
    pub protocol: Protocol,
    pub scale: [i8; 5],
    pub scale_labels: [&'static str; 5],
    pub dimensions: &'static [Dimension],
    pub flags: Vec<FlagOption>,
}

impl ProtocolSheet {
    pub fn new(protocol: Protocol) -> Self {
        Self {
            protocol,
            scale: [-2, -1, 0, 1, 2],
            scale_labels: SCALE_LABELS,
            dimensions: protocol.dimensions(),
            flags: FlagCategory::ALL
                .iter()
                .map(|&c| FlagOption { id: c, label: c.label(), requires_note: c == FlagCategory::Other })
                .collect(),
        }
    }
}
