#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mixens/decoding.hpp"
#include "mixens/ngram_model.hpp"
#include "mixens/table_model.hpp"
#include "mixens/tokenize.hpp"

namespace fixtures {

using namespace mixens;

inline VocabularyPtr ab_vocab() {
  static const VocabularyPtr v = make_vocabulary({"a", "b"});
  return v;
}

inline std::unique_ptr<TokenPredictor> constant_model(const VocabularyPtr& vocab, std::vector<double> probs) {
  return TableModel::context_free(Distribution(vocab, std::move(probs)));
}

// p = [0.6, 0.4], q = [0.2, 0.8] over {a, b}.
inline EnsembleSpec table_pair(std::vector<double> weights = {0.5, 0.5}) {
  std::vector<std::unique_ptr<TokenPredictor>> models;
  models.push_back(constant_model(ab_vocab(), {0.6, 0.4}));
  models.push_back(constant_model(ab_vocab(), {0.2, 0.8}));
  return EnsembleSpec(std::move(models), EnsembleWeights(std::move(weights)));
}

inline const std::string& corpus_a() {
  static const std::string text =
      "the cat sat on the mat. the cat ate the rat. a cat sees a hat on the mat. "
      "the mat is flat and the hat is on the cat.";
  return text;
}

inline const std::string& corpus_b() {
  static const std::string text =
      "a hen set ten eggs in the nest. ten hens sat in the shed. the nest is neat and "
      "the shed has a net. then the hen ate.";
  return text;
}

// Shared character vocabulary of both corpora, first appearance order.
inline VocabularyPtr corpus_vocab() {
  static const VocabularyPtr v = [] {
    auto tokens = tokenize(corpus_a() + corpus_b(), Tokenization::Char);
    return make_vocabulary(distinct_tokens(tokens));
  }();
  return v;
}

inline std::unique_ptr<NGramModel> train_char(const std::string& corpus, std::size_t order, double alpha,
                                              const VocabularyPtr& vocab = corpus_vocab()) {
  const auto tokens = tokenize(corpus, Tokenization::Char);
  return NGramModel::train(encode(*vocab, tokens), order, alpha, vocab, Tokenization::Char);
}

inline EnsembleSpec ngram_pair(std::vector<double> weights = {0.5, 0.5}, std::size_t order = 2, double alpha = 0.05) {
  std::vector<std::unique_ptr<TokenPredictor>> models;
  models.push_back(train_char(corpus_a(), order, alpha));
  models.push_back(train_char(corpus_b(), order, alpha));
  return EnsembleSpec(std::move(models), EnsembleWeights(std::move(weights)));
}

inline TokenSequence encode_chars(const VocabularyPtr& vocab, const std::string& text) {
  return TokenSequence(vocab, encode(*vocab, tokenize(text, Tokenization::Char)));
}

}  // namespace fixtures
