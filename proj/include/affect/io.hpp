// SPDX-License-Identifier: Apache-2.0
//
// Text formats exchanged with the command line tools: annotation, feature and
// prediction CSVs. Doubles are written with 17 significant digits so every
// file round-trips bit-exactly.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "affect/types.hpp"

namespace affect {

/// printf "%.17g".
std::string format_double(double v);
/// Whole-string parses; throw ParseError.
double parse_double(const std::string& s);
int parse_int(const std::string& s);

std::vector<std::string> split(const std::string& s, char sep);
/// Comma-separated rows with surrounding whitespace trimmed; blank lines skipped.
std::vector<std::vector<std::string>> read_csv(std::istream& in);
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

/// `id,split,sequence_id,utterance_id,frame_index,task,payload`. Payload is
/// `v;a`, an expression index 0-6, or 17 characters over {0,1,-}.
void write_annotations(std::ostream& out, const std::vector<AnnotatedSample>& samples);
/// Samples come back without features.
std::vector<AnnotatedSample> read_annotations(std::istream& in);

std::string au_payload(const AUVector& aus);
AUVector parse_au_payload(const std::string& payload);

/// `id,f0,f1,...` rows.
void write_feature_rows(std::ostream& out, const std::vector<std::string>& ids,
                        const std::vector<const Eigen::VectorXd*>& rows);

/// annotations.csv and features.csv, plus audio.csv / landmarks.csv when any
/// sample carries those streams.
void save_dataset(const std::filesystem::path& dir, const std::vector<AnnotatedSample>& samples);
/// Joins the files by id; throws ParseError for ids without feature rows.
std::vector<AnnotatedSample> load_dataset(const std::filesystem::path& dir);

/// `id,frame_index,valence,arousal,expr,au` with ';'-joined probability lists.
void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& records);
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions(std::istream& in);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

}  // namespace affect
