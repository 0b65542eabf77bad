#pragma once

#include <sketchd/codec.hpp>
#include <sketchd/engine/state.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>


namespace sketchd {

namespace detail {

using codec::json;

inline std::string to_hex(const std::vector<std::uint64_t> &words)
{
    std::string out;
    out.reserve(words.size() * 16);
    char buf[17];
    for (auto w : words) {
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(w));
        out += buf;
    }
    return out;
}

inline std::vector<std::uint64_t> from_hex(const std::string &s)
{
    if (s.size() % 16) throw corrupt_snapshot("bloom filter bits have odd length");
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i != s.size(); i += 16) {
        std::uint64_t w = 0;
        for (std::size_t j = i; j != i + 16; ++j) {
            char c = s[j];
            int d = c >= '0' and c <= '9' ? c - '0' : c >= 'a' and c <= 'f' ? c - 'a' + 10 : -1;
            if (d < 0) throw corrupt_snapshot("bloom filter bits are not hex");
            w = (w << 4) | static_cast<std::uint64_t>(d);
        }
        out.push_back(w);
    }
    return out;
}

inline json bloom_to_json(const std::optional<BloomFilter> &f)
{
    if (not f) return nullptr;
    return {{"m", f->bit_count()}, {"h", f->hash_count()}, {"capacity", f->capacity()}, {"inserted", f->inserted()},
            {"fpr", f->target_fpr()}, {"bits", to_hex(f->bits())}};
}

inline std::optional<BloomFilter> bloom_from_json(const json &j)
{
    if (j.is_null()) return std::nullopt;
    auto bits = from_hex(j.at("bits").get<std::string>());
    auto m = j.at("m").get<std::uint64_t>();
    if (bits.size() != (m + 63) / 64) throw corrupt_snapshot("bloom filter size does not match its bits");
    return BloomFilter::restore(std::move(bits), m, j.at("h").get<std::uint32_t>(), j.at("capacity").get<std::size_t>(),
                                j.at("inserted").get<std::size_t>(), j.at("fpr").get<double>());
}

inline json counts_to_json(const std::map<FragmentId, std::int64_t> &m)
{
    json a = json::array();
    for (const auto &[f, n] : m) a.push_back({f, n});
    return a;
}

inline json node_to_json(const BoundNode &node, const NodeState &ns)
{
    using codec::to_json;
    json j = {{"id", node.id}, {"kind", std::string(node_kind_name(node.kind))}};
    if (auto *m = std::get_if<MergeState>(&ns)) {
        json counts = json::array();
        for (std::size_t f = 0; f != m->counts.size(); ++f)
            if (m->counts[f]) counts.push_back({f, m->counts[f]});
        j["fragments"] = m->counts.size();
        j["counts"] = counts;
    } else if (auto *a = std::get_if<AggState>(&ns)) {
        std::vector<const std::pair<const Tuple, AggGroup>*> sorted;
        for (const auto &e : a->groups) sorted.push_back(&e);
        std::sort(sorted.begin(), sorted.end(), [](auto *x, auto *y) { return x->first < y->first; });
        json groups = json::array();
        for (const auto *e : sorted) {
            const AggGroup &g = e->second;
            json sums = json::array(), extremes = json::array();
            for (const auto &v : g.sums) sums.push_back(to_json(v));
            for (const auto &x : g.extremes) {
                json values = json::array();
                for (const auto &[v, n] : x.values) values.push_back({to_json(v), n});
                extremes.push_back({{"values", values}, {"truncated", x.truncated}, {"cutoff", to_json(x.cutoff)}});
            }
            groups.push_back({{"key", to_json(e->first)}, {"cnt", g.cnt}, {"sums", sums}, {"extremes", extremes},
                              {"frags", counts_to_json(g.frag_counts)}});
        }
        j["minmax_capacity"] = a->minmax_capacity;
        j["groups"] = groups;
    } else if (auto *t = std::get_if<TopKState>(&ns)) {
        json entries = json::array();
        for (const auto &[o, inner] : t->entries)
            for (const auto &[e, n] : inner)
                entries.push_back({{"order", to_json(o)}, {"tuple", to_json(e.first)}, {"sketch", to_json(e.second)},
                                   {"n", n}});
        j["k"] = t->k;
        j["capacity"] = t->capacity;
        j["total"] = t->total;
        j["truncated"] = t->truncated;
        j["cutoff"] = {{"order", to_json(t->cutoff_order)}, {"tuple", to_json(t->cutoff_entry.first)},
                       {"sketch", to_json(t->cutoff_entry.second)}};
        j["entries"] = entries;
    } else if (auto *js = std::get_if<JoinState>(&ns)) {
        j["left_bloom"] = bloom_to_json(js->left);
        j["right_bloom"] = bloom_to_json(js->right);
    }
    return j;
}

inline NodeState node_from_json(const BoundNode &node, const json &j)
{
    if (j.at("id").get<std::size_t>() != node.id or j.at("kind").get<std::string>() != node_kind_name(node.kind))
        throw corrupt_snapshot("node section " + std::to_string(node.id) + " does not match the plan");
    switch (node.kind) {
        case NodeKind::merge: {
            MergeState m(j.at("fragments").get<std::size_t>());
            for (const auto &c : j.at("counts")) {
                auto f = c.at(0).get<std::size_t>();
                if (f >= m.counts.size()) throw corrupt_snapshot("merge count for unknown fragment");
                m.counts[f] = c.at(1).get<std::int64_t>();
            }
            m.refresh();
            return m;
        }
        case NodeKind::aggregate: {
            AggState a;
            a.minmax_capacity = j.at("minmax_capacity").get<std::size_t>();
            for (const auto &g : j.at("groups")) {
                AggGroup grp;
                grp.cnt = g.at("cnt").get<std::int64_t>();
                for (const auto &v : g.at("sums")) grp.sums.push_back(codec::value_from_json(v));
                for (const auto &x : g.at("extremes")) {
                    ExtremeBuffer b;
                    for (const auto &e : x.at("values")) b.values.emplace(codec::value_from_json(e.at(0)), e.at(1).get<std::int64_t>());
                    b.truncated = x.at("truncated").get<bool>();
                    b.cutoff = codec::value_from_json(x.at("cutoff"));
                    grp.extremes.push_back(std::move(b));
                }
                for (const auto &c : g.at("frags")) grp.frag_counts.emplace(c.at(0).get<FragmentId>(), c.at(1).get<std::int64_t>());
                if (grp.sums.size() != node.aggs.size() or grp.extremes.size() != node.aggs.size())
                    throw corrupt_snapshot("aggregate group does not match the plan");
                a.groups.emplace(codec::tuple_from_json(g.at("key")), std::move(grp));
            }
            return a;
        }
        case NodeKind::topk: {
            TopKState t(node, j.at("capacity").get<std::size_t>());
            if (j.at("k").get<std::size_t>() != node.k) throw corrupt_snapshot("top-k section does not match the plan");
            t.total = j.at("total").get<std::int64_t>();
            t.truncated = j.at("truncated").get<bool>();
            const auto &c = j.at("cutoff");
            t.cutoff_order = codec::tuple_from_json(c.at("order"));
            t.cutoff_entry = {codec::tuple_from_json(c.at("tuple")), codec::sketch_from_json(c.at("sketch"))};
            for (const auto &e : j.at("entries"))
                t.entries[codec::tuple_from_json(e.at("order"))][{codec::tuple_from_json(e.at("tuple")),
                                                                  codec::sketch_from_json(e.at("sketch"))}] =
                    e.at("n").get<std::int64_t>();
            return t;
        }
        case NodeKind::join: {
            JoinState js;
            js.left = bloom_from_json(j.at("left_bloom"));
            js.right = bloom_from_json(j.at("right_bloom"));
            return js;
        }
        default: return std::monostate{};
    }
}

inline void collect_nodes(const BoundNode &n, std::vector<const BoundNode*> &out)
{
    out.push_back(&n);
    for (const auto &c : n.children) collect_nodes(c, out);
}

/** Schemas recorded in a snapshot, for rebinding the plan. */
class SchemaList : public RowSource
{
    std::vector<Schema> schemas_;

    public:
    explicit SchemaList(std::vector<Schema> s) : schemas_(std::move(s)) { }

    const Schema & schema(std::string_view relation) const override {
        for (const auto &s : schemas_) if (s.name == relation) return s;
        throw corrupt_snapshot("snapshot lacks the schema of '" + std::string(relation) + "'");
    }
    void scan(std::string_view, const RowVisitor&) const override { }
};

}

inline constexpr int state_format_version = 1;

inline codec::json state_to_json(const EngineState &st)
{
    using detail::json;
    json schemas = json::array();
    std::vector<const BoundNode*> nodes;
    detail::collect_nodes(st.root, nodes);
    std::vector<std::string> seen;
    for (const auto *n : nodes)
        if (n->kind == NodeKind::table and std::find(seen.begin(), seen.end(), n->relation) == seen.end()) {
            seen.push_back(n->relation);
            schemas.push_back(codec::to_json(n->schema));
        }
    json sections = json::array();
    for (const auto *n : nodes)
        if (not std::holds_alternative<std::monostate>(st.nodes.at(n->id)))
            sections.push_back(detail::node_to_json(*n, st.nodes.at(n->id)));

    const auto &c = st.config;
    json j = {
        {"format", "sketchd-state"},
        {"format_version", state_format_version},
        {"plan", codec::to_json(st.plan)},
        {"schemas", schemas},
        {"catalog", codec::to_json(st.catalog)},
        {"config", {{"bloom", c.bloom}, {"bloom_fpr", c.bloom_fpr}, {"pushdown", c.pushdown}, {"bounded", c.bounded},
                    {"topk_buffer", c.topk_buffer}, {"minmax_buffer", c.minmax_buffer}}},
        {"last_version", st.last_version},
        {"stats", {{"join_delta_in", st.stats.join_delta_in}, {"join_delta_forwarded", st.stats.join_delta_forwarded},
                   {"round_trips", st.stats.round_trips}, {"skipped_round_trips", st.stats.skipped_round_trips},
                   {"bloom_builds", st.stats.bloom_builds}}},
        {"nodes", sections},
    };
    return j;
}

/** Serializes an engine state as self-describing JSON text.  Output is deterministic: equal states give equal text. */
inline std::string persist_state(const EngineState &st)
{
    return state_to_json(st).dump(1) + "\n";
}

inline EngineState state_from_json(const codec::json &j)
{
    using detail::json;
    try {
        if (j.at("format").get<std::string>() != "sketchd-state") throw corrupt_snapshot("not an engine state");
        if (j.at("format_version").get<int>() != state_format_version)
            throw corrupt_snapshot("unsupported state format version");
        EngineState st;
        st.plan = codec::plan_from_json(j.at("plan"));
        std::vector<Schema> schemas;
        for (const auto &s : j.at("schemas")) schemas.push_back(codec::schema_from_json(s));
        st.catalog = codec::catalog_from_json(j.at("catalog"));
        const auto &c = j.at("config");
        st.config.bloom = c.at("bloom").get<bool>();
        st.config.bloom_fpr = c.at("bloom_fpr").get<double>();
        st.config.pushdown = c.at("pushdown").get<bool>();
        st.config.bounded = c.at("bounded").get<bool>();
        st.config.topk_buffer = c.at("topk_buffer").get<std::size_t>();
        st.config.minmax_buffer = c.at("minmax_buffer").get<std::size_t>();
        st.last_version = j.at("last_version").get<std::uint64_t>();
        const auto &s = j.at("stats");
        st.stats.join_delta_in = s.at("join_delta_in").get<std::uint64_t>();
        st.stats.join_delta_forwarded = s.at("join_delta_forwarded").get<std::uint64_t>();
        st.stats.round_trips = s.at("round_trips").get<std::uint64_t>();
        st.stats.skipped_round_trips = s.at("skipped_round_trips").get<std::uint64_t>();
        st.stats.bloom_builds = s.at("bloom_builds").get<std::uint64_t>();

        st.root = bind(st.plan, detail::SchemaList(std::move(schemas)));
        if (st.root.kind != NodeKind::merge) throw corrupt_snapshot("state plan lacks a merge root");
        st.nodes = empty_states(st.root, st.catalog, st.config);
        std::vector<const BoundNode*> nodes;
        detail::collect_nodes(st.root, nodes);
        const auto &sections = j.at("nodes");
        std::size_t next = 0;
        for (const auto *n : nodes) {
            if (std::holds_alternative<std::monostate>(st.nodes[n->id])) continue;
            if (next == sections.size()) throw corrupt_snapshot("missing node sections");
            st.nodes[n->id] = detail::node_from_json(*n, sections.at(next++));
        }
        if (next != sections.size()) throw corrupt_snapshot("extra node sections");
        if (std::get<MergeState>(st.nodes[st.root.id]).counts.size() != st.catalog.fragment_count())
            throw corrupt_snapshot("merge state does not match the catalog");
        return st;
    } catch (const corrupt_snapshot&) {
        throw;
    } catch (const json::exception &e) {
        throw corrupt_snapshot(std::string("malformed engine state: ") + e.what());
    } catch (const error &e) {
        throw corrupt_snapshot(std::string("inconsistent engine state: ") + e.what());
    }
}

/** Inverse of `persist_state`; anything malformed raises `corrupt_snapshot`. */
inline EngineState restore_state(const std::string &text)
{
    codec::json j;
    try {
        j = codec::json::parse(text);
    } catch (const codec::json::exception &e) {
        throw corrupt_snapshot(std::string("malformed engine state: ") + e.what());
    }
    return state_from_json(j);
}

inline void persist_state_file(const EngineState &st, const std::string &path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (not out) throw error("cannot write '" + path + "'");
    out << persist_state(st);
    if (not out) throw error("failed writing '" + path + "'");
}

inline EngineState restore_state_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (not in) throw corrupt_snapshot("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return restore_state(ss.str());
}

}
