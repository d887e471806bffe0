#include "qabench/tagger.hpp"

#include "qabench/error.hpp"
#include "qabench/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include <fmt/format.h>
#include <unistd.h>
#include <zlib.h>

#ifndef QABENCH_DATA_DIR_DEFAULT
#define QABENCH_DATA_DIR_DEFAULT "data"
#endif

namespace qabench {

namespace {

constexpr char kMagic[8] = {'Q', 'B', 'P', 'T', 'A', 'G', '\0', '\0'};
const std::string kStart[2] = {"-START-", "-START2-"};
const std::string kEnd[2] = {"-END-", "-END2-"};

bool is_ascii_digits(std::string_view s)
{
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string join(std::initializer_list<std::string_view> parts)
{
    std::string out;
    for (auto p : parts) {
        if (!out.empty())
            out.push_back(' ');
        out.append(p);
    }
    return out;
}

std::vector<std::string> padded_context(std::span<const std::string> words)
{
    std::vector<std::string> ctx;
    ctx.reserve(words.size() + 4);
    ctx.push_back(kStart[0]);
    ctx.push_back(kStart[1]);
    for (const auto& w : words)
        ctx.push_back(normalize_word(w));
    ctx.push_back(kEnd[0]);
    ctx.push_back(kEnd[1]);
    return ctx;
}

// Little-endian reader/writer for the weights format.
class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <class T>
    T read()
    {
        if (pos_ + sizeof(T) > bytes_.size())
            throw ParseError("tagger weights: truncated file", pos_);
        T v{};
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v = static_cast<T>(v | (static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i)));
        pos_ += sizeof(T);
        return v;
    }

    std::string read_string(std::size_t len)
    {
        if (pos_ + len > bytes_.size())
            throw ParseError("tagger weights: truncated file", pos_);
        std::string s(bytes_.substr(pos_, len));
        pos_ += len;
        return s;
    }

    std::size_t position() const noexcept { return pos_; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

template <class T>
void write_le(std::string& out, T v)
{
    using U = std::make_unsigned_t<T>;
    const auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot read {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> ptb_words(const TokenSequence& sentence)
{
    std::vector<std::string> words;
    words.reserve(sentence.surface.size());
    bool quote_open = false;
    for (const auto& s : sentence.surface) {
        bool opening = false;
        if (s == "\"") {
            opening = !quote_open;
            quote_open = !quote_open;
        }
        words.push_back(ptb_token(s, opening));
    }
    return words;
}

} // namespace

std::string normalize_word(std::string_view word)
{
    if (word.find('-') != std::string_view::npos && word.front() != '-')
        return "!HYPHEN";
    if (word.size() == 4 && is_ascii_digits(word))
        return "!YEAR";
    if (!word.empty() && word.front() >= '0' && word.front() <= '9')
        return "!DIGITS";
    return utf8::lower(word);
}

std::string ptb_token(std::string_view s, bool opening)
{
    if (s == "(" || s == "[" || s == "{")
        return "-LRB-";
    if (s == ")" || s == "]" || s == "}")
        return "-RRB-";
    if (s == "\"")
        return opening ? "``" : "''";
    if (s == "\xE2\x80\x9C")  // left double quotation mark
        return "``";
    if (s == "\xE2\x80\x9D")
        return "''";
    if (s == "\xE2\x80\x98")
        return "`";
    if (s == "\xE2\x80\x99")
        return "'";
    if (s == "\xE2\x80\xA6")
        return "...";
    if (s == "\xE2\x80\x93" || s == "\xE2\x80\x94")
        return "--";
    return std::string(s);
}

std::vector<std::string> perceptron_features(std::size_t i, std::string_view word, std::span<const std::string> ctx,
                                             std::string_view prev, std::string_view prev2)
{
    i += 2;
    std::vector<std::string> f;
    f.reserve(14);
    f.emplace_back("bias");
    f.push_back(join({"i suffix", utf8::last_code_points(word, 3)}));
    f.push_back(join({"i pref1", utf8::first_code_point(word)}));
    f.push_back(join({"i-1 tag", prev}));
    f.push_back(join({"i-2 tag", prev2}));
    f.push_back(join({"i tag+i-2 tag", prev, prev2}));
    f.push_back(join({"i word", ctx[i]}));
    f.push_back(join({"i-1 tag+i word", prev, ctx[i]}));
    f.push_back(join({"i-1 word", ctx[i - 1]}));
    f.push_back(join({"i-1 suffix", utf8::last_code_points(ctx[i - 1], 3)}));
    f.push_back(join({"i-2 word", ctx[i - 2]}));
    f.push_back(join({"i+1 word", ctx[i + 1]}));
    f.push_back(join({"i+1 suffix", utf8::last_code_points(ctx[i + 1], 3)}));
    f.push_back(join({"i+2 word", ctx[i + 2]}));
    return f;
}

// ------------------------------------------------------------ model I/O

PerceptronModel PerceptronModel::deserialize(std::string_view bytes)
{
    if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw ParseError("tagger weights: bad magic");
    const std::string_view body = bytes.substr(0, bytes.size() - 4);
    Reader tail(bytes.substr(bytes.size() - 4));
    const auto stored_crc = tail.read<std::uint32_t>();
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
    if (crc != stored_crc)
        throw ParseError(fmt::format("tagger weights: checksum mismatch (stored {:08x}, computed {:08x})", stored_crc, crc));

    Reader r(body.substr(sizeof(kMagic)));
    const auto version = r.read<std::uint32_t>();
    if (version != kFormatVersion)
        throw ParseError(fmt::format("tagger weights: unsupported format version {}", version));

    PerceptronModel m;
    const auto n_classes = r.read<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_classes; ++i)
        m.classes_.push_back(r.read_string(r.read<std::uint8_t>()));

    const auto n_dict = r.read<std::uint32_t>();
    m.tagdict_.reserve(n_dict);
    for (std::uint32_t i = 0; i < n_dict; ++i) {
        auto word = r.read_string(r.read<std::uint16_t>());
        const auto cls = r.read<std::uint8_t>();
        if (cls >= n_classes)
            throw ParseError("tagger weights: class index out of range", r.position());
        m.tagdict_.emplace(std::move(word), cls);
    }

    const auto n_feats = r.read<std::uint32_t>();
    m.features_.reserve(n_feats);
    for (std::uint32_t i = 0; i < n_feats; ++i) {
        auto feat = r.read_string(r.read<std::uint16_t>());
        const auto n = r.read<std::uint8_t>();
        std::vector<Weight> ws(n);
        for (auto& w : ws) {
            w.cls = r.read<std::uint8_t>();
            w.milli = r.read<std::int32_t>();
            if (w.cls >= n_classes)
                throw ParseError("tagger weights: class index out of range", r.position());
        }
        m.features_.emplace(std::move(feat), std::move(ws));
    }
    return m;
}

PerceptronModel PerceptronModel::load(const std::filesystem::path& path)
{
    return deserialize(read_file(path));
}

std::string PerceptronModel::serialize() const
{
    std::string out(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(out, kFormatVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(classes_.size()));
    for (const auto& c : classes_) {
        write_le<std::uint8_t>(out, static_cast<std::uint8_t>(c.size()));
        out += c;
    }
    std::map<std::string_view, std::uint8_t> dict(tagdict_.begin(), tagdict_.end());
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dict.size()));
    for (const auto& [word, cls] : dict) {
        write_le<std::uint16_t>(out, static_cast<std::uint16_t>(word.size()));
        out += word;
        write_le<std::uint8_t>(out, cls);
    }
    std::map<std::string_view, const std::vector<Weight>*> feats;
    for (const auto& [f, ws] : features_)
        if (!ws.empty())
            feats.emplace(f, &ws);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(feats.size()));
    for (const auto& [f, ws] : feats) {
        write_le<std::uint16_t>(out, static_cast<std::uint16_t>(f.size()));
        out += f;
        write_le<std::uint8_t>(out, static_cast<std::uint8_t>(ws->size()));
        for (const auto& w : *ws) {
            write_le<std::uint8_t>(out, w.cls);
            write_le<std::int32_t>(out, w.milli);
        }
    }
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size())));
    write_le<std::uint32_t>(out, crc);
    return out;
}

void PerceptronModel::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError(fmt::format("cannot write {}", path.string()));
    const auto bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError(fmt::format("short write to {}", path.string()));
}

// ------------------------------------------------------------ inference

int PerceptronModel::predict(std::span<const std::string> features) const
{
    std::vector<std::int64_t> scores(classes_.size(), 0);
    for (const auto& f : features) {
        auto it = features_.find(f);
        if (it == features_.end())
            continue;
        for (const auto& w : it->second)
            scores[w.cls] += w.milli;
    }
    // Highest score; ties go to the alphabetically last class, and classes_
    // is sorted.
    int best = 0;
    for (int c = 1; c < static_cast<int>(scores.size()); ++c)
        if (scores[c] >= scores[best])
            best = c;
    return best;
}

std::vector<std::string> PerceptronModel::tag_words(std::span<const std::string> words) const
{
    std::vector<std::string> tags;
    tags.reserve(words.size());
    if (words.empty())
        return tags;
    const auto ctx = padded_context(words);
    std::string prev = kStart[0], prev2 = kStart[1];
    for (std::size_t i = 0; i < words.size(); ++i) {
        std::string tag;
        if (auto it = tagdict_.find(words[i]); it != tagdict_.end()) {
            tag = classes_[it->second];
        }
        else {
            const auto feats = perceptron_features(i, words[i], ctx, prev, prev2);
            tag = classes_[static_cast<std::size_t>(predict(feats))];
        }
        prev2 = std::move(prev);
        prev = tag;
        tags.push_back(std::move(tag));
    }
    return tags;
}

// ------------------------------------------------------------- training

std::vector<TaggedSentence> parse_tagged_corpus(std::string_view contents)
{
    std::vector<TaggedSentence> out;
    TaggedSentence current;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= contents.size()) {
        auto nl = contents.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = contents.size();
        std::string_view line = contents.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty() || line.front() == '#') {
            if (!current.words.empty())
                out.push_back(std::move(current));
            current = {};
            if (nl == contents.size())
                break;
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0 || tab + 1 >= line.size())
            throw ParseError(fmt::format("tagged corpus: line {}: expected word<TAB>tag", line_no), line_no);
        current.words.emplace_back(line.substr(0, tab));
        current.tags.emplace_back(line.substr(tab + 1));
        if (nl == contents.size())
            break;
    }
    if (!current.words.empty())
        out.push_back(std::move(current));
    return out;
}

std::vector<TaggedSentence> read_tagged_corpus(const std::filesystem::path& path)
{
    return parse_tagged_corpus(read_file(path));
}

PerceptronModel PerceptronTrainer::train(std::vector<TaggedSentence> sentences, const Options& options)
{
    PerceptronModel model;

    // Classes and the tag dictionary of frequent, unambiguous words.
    std::map<std::string, std::map<std::string, std::size_t>> counts;
    std::map<std::string, int> class_index;
    for (const auto& s : sentences) {
        if (s.words.size() != s.tags.size())
            throw AlignmentError("training sentence with mismatched words and tags");
        for (std::size_t i = 0; i < s.words.size(); ++i) {
            ++counts[s.words[i]][s.tags[i]];
            class_index.emplace(s.tags[i], 0);
        }
    }
    if (class_index.size() > 255)
        throw Error("perceptron trainer: more than 255 classes");
    for (auto& [tag, idx] : class_index) {
        idx = static_cast<int>(model.classes_.size());
        model.classes_.push_back(tag);
    }
    for (const auto& [word, freqs] : counts) {
        std::size_t n = 0;
        const std::pair<const std::string, std::size_t>* mode = nullptr;
        for (const auto& kv : freqs) {
            n += kv.second;
            if (!mode || kv.second > mode->second)
                mode = &kv;
        }
        if (n >= options.tagdict_min_count &&
            static_cast<double>(mode->second) / static_cast<double>(n) >= options.tagdict_min_ratio)
            model.tagdict_.emplace(word, static_cast<std::uint8_t>(class_index.at(mode->first)));
    }

    const std::size_t n_classes = model.classes_.size();
    struct Param {
        std::vector<double> weight, total;
        std::vector<std::int64_t> stamp;
    };
    std::unordered_map<std::string, Param> params;
    std::int64_t instances = 0;

    auto predict = [&](const std::vector<std::string>& feats) {
        std::vector<double> scores(n_classes, 0.0);
        for (const auto& f : feats) {
            auto it = params.find(f);
            if (it == params.end())
                continue;
            for (std::size_t c = 0; c < n_classes; ++c)
                scores[c] += it->second.weight[c];
        }
        std::size_t best = 0;
        for (std::size_t c = 1; c < n_classes; ++c)
            if (scores[c] >= scores[best])
                best = c;
        return best;
    };
    auto bump = [&](Param& p, std::size_t c, double delta) {
        p.total[c] += static_cast<double>(instances - p.stamp[c]) * p.weight[c];
        p.stamp[c] = instances;
        p.weight[c] += delta;
    };

    Rng rng(options.seed);
    for (int iter = 0; iter < options.iterations; ++iter) {
        for (const auto& s : sentences) {
            const auto ctx = padded_context(s.words);
            std::string prev = kStart[0], prev2 = kStart[1];
            for (std::size_t i = 0; i < s.words.size(); ++i) {
                std::size_t guess;
                if (auto it = model.tagdict_.find(s.words[i]); it != model.tagdict_.end()) {
                    guess = it->second;
                }
                else {
                    const auto feats = perceptron_features(i, s.words[i], ctx, prev, prev2);
                    guess = predict(feats);
                    const auto truth = static_cast<std::size_t>(class_index.at(s.tags[i]));
                    ++instances;
                    if (truth != guess) {
                        for (const auto& f : feats) {
                            auto [it2, fresh] = params.try_emplace(f);
                            if (fresh)
                                it2->second = {std::vector<double>(n_classes, 0.0), std::vector<double>(n_classes, 0.0),
                                               std::vector<std::int64_t>(n_classes, 0)};
                            bump(it2->second, truth, 1.0);
                            bump(it2->second, guess, -1.0);
                        }
                    }
                }
                prev2 = std::move(prev);
                prev = model.classes_[guess];
            }
        }
        rng.shuffle(sentences);
    }

    for (auto& [feat, p] : params) {
        std::vector<PerceptronModel::Weight> ws;
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double total = p.total[c] + static_cast<double>(instances - p.stamp[c]) * p.weight[c];
            const auto milli = instances > 0 ? std::llround(total / static_cast<double>(instances) * 1000.0) : 0;
            if (milli != 0)
                ws.push_back({static_cast<std::uint8_t>(c), static_cast<std::int32_t>(milli)});
        }
        if (!ws.empty())
            model.features_.emplace(feat, std::move(ws));
    }
    return model;
}

double tagging_accuracy(const PerceptronModel& model, std::span<const TaggedSentence> gold)
{
    std::size_t correct = 0, total = 0;
    for (const auto& s : gold) {
        const auto tags = model.tag_words(s.words);
        for (std::size_t i = 0; i < tags.size(); ++i)
            correct += tags[i] == s.tags[i];
        total += tags.size();
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

// -------------------------------------------------------------- taggers

PosSequence Tagger::tag(const TokenSequence& sentence) const
{
    return tag_batch(std::span<const TokenSequence>(&sentence, 1)).front();
}

std::filesystem::path PerceptronTagger::builtin_weights_path()
{
    std::filesystem::path dir = QABENCH_DATA_DIR_DEFAULT;
    if (const char* env = std::getenv("QABENCH_DATA_DIR"); env && *env)
        dir = env;
    return dir / "tagger" / "ptb-perceptron-v1.bin";
}

PerceptronTagger PerceptronTagger::builtin()
{
    static std::mutex mu;
    static std::shared_ptr<const PerceptronModel> cached;
    std::lock_guard lock(mu);
    if (!cached)
        cached = std::make_shared<const PerceptronModel>(PerceptronModel::load(builtin_weights_path()));
    return PerceptronTagger(cached);
}

std::vector<PosSequence> PerceptronTagger::tag_batch_serial(std::span<const TokenSequence> sentences) const
{
    std::vector<PosSequence> out(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i)
        out[i].tags = model_->tag_words(ptb_words(sentences[i]));
    return out;
}

std::vector<PosSequence> PerceptronTagger::tag_batch(std::span<const TokenSequence> sentences) const
{
    std::vector<PosSequence> out(sentences.size());
    const auto n = static_cast<std::int64_t>(sentences.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)].tags = model_->tag_words(ptb_words(sentences[static_cast<std::size_t>(i)]));
    return out;
}

std::vector<PosSequence> ExternalTagger::tag_batch(std::span<const TokenSequence> sentences) const
{
    static std::atomic<unsigned> counter{0};
    const auto input = std::filesystem::temp_directory_path() /
                       fmt::format("qabench-tagger-{}-{}.txt", ::getpid(), counter.fetch_add(1));
    {
        std::ofstream f(input, std::ios::binary | std::ios::trunc);
        if (!f)
            throw IoError(fmt::format("cannot write {}", input.string()));
        for (const auto& s : sentences) {
            for (std::size_t i = 0; i < s.surface.size(); ++i)
                f << (i ? "\t" : "") << s.surface[i];
            f << '\n';
        }
    }

    const std::string cmd = fmt::format("{} < '{}'", command_, input.string());
    std::string output;
    int status = -1;
    if (FILE* pipe = ::popen(cmd.c_str(), "r")) {
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0)
            output.append(buf, n);
        status = ::pclose(pipe);
    }
    std::error_code ec;
    std::filesystem::remove(input, ec);
    if (status != 0)
        throw Error(fmt::format("external tagger '{}' failed (status {})", command_, status));

    std::vector<PosSequence> out;
    out.reserve(sentences.size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (pos > output.size())
            throw AlignmentError(fmt::format("external tagger returned {} lines for {} sentences", i, sentences.size()));
        auto nl = output.find('\n', pos);
        if (nl == std::string::npos)
            nl = output.size();
        std::string_view line(output.data() + pos, nl - pos);
        pos = nl + 1;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        PosSequence seq;
        std::size_t start = 0;
        while (!line.empty() && start <= line.size()) {
            auto tab = line.find('\t', start);
            if (tab == std::string_view::npos)
                tab = line.size();
            seq.tags.emplace_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (seq.tags.size() != sentences[i].size())
            throw AlignmentError(fmt::format("external tagger: sentence {} has {} tokens but {} tags", i + 1,
                                             sentences[i].size(), seq.tags.size()));
        for (const auto& t : seq.tags)
            if (!is_ptb_tag(t))
                throw AlignmentError(fmt::format("external tagger: sentence {}: unknown tag \"{}\"", i + 1, t));
        out.push_back(std::move(seq));
    }
    return out;
}

PosSequence pos_tag(std::string_view text, const Tagger& tagger)
{
    return tagger.tag(tokenize(text));
}

} // namespace qabench
