#pragma once

#include <filesystem>
#include <string>

#include "kmq/corpus.hpp"

namespace kmq {

enum class CorpusFormat { kJsonl, kBinary };

CorpusFormat format_from_name(const std::string& name);

// JSONL: one `{"id":…, "embedding":[…], "quality":…|null, "text":…|null}`
// object per line. Binary: magic "KMQ1", u32 dimension, u64 count, then per
// record u16 id-length + id bytes + dimension f32 values + f32 quality
// (NaN encodes absent), all little-endian.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path,
                 CorpusFormat format);

// Selection manifest: `{"method":…, "budget":…, "params":{…}, "ids":[…]}`.
void save_selection(const Selection& selection, const std::filesystem::path& path);
Selection load_selection(const std::filesystem::path& path);

// FNV-1a over the file bytes, hex-encoded; embedded in output manifests for
// provenance.
std::string content_hash(const std::filesystem::path& path);

}  // namespace kmq
