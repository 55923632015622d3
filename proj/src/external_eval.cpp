#include <cmath>

#include "seqnas/errors.hpp"
#include "seqnas/evaluators.hpp"
#include "seqnas/json_io.hpp"
#include "seqnas/line_channel.hpp"

namespace seqnas {

namespace {

using wire_json = nlohmann::ordered_json;

wire_json parse_message(const std::string& line)
{
    try {
        wire_json m = wire_json::parse(line);
        if (!m.is_object() || !m.contains("type") || !m["type"].is_string())
            throw EvalError("protocol", "trainer message lacks a string 'type': " + line);
        return m;
    } catch (const wire_json::parse_error&) {
        throw EvalError("protocol", "trainer sent malformed JSON: " + line);
    }
}

std::string field_or(const wire_json& m, const char* key, const std::string& fallback)
{
    auto it = m.find(key);
    return (it != m.end() && it->is_string()) ? it->get<std::string>() : fallback;
}

}  // namespace

ExternalEvaluator::ExternalEvaluator(ExternalConfig cfg) : cfg_(std::move(cfg))
{
    if (!(cfg_.timeout_seconds > 0))
        throw ConfigError("trainer timeout must be positive");
    if (cfg_.endpoint.command.empty() && cfg_.endpoint.host.empty())
        throw ConfigError("trainer endpoint is empty");
}

ExternalEvaluator::~ExternalEvaluator() = default;

void ExternalEvaluator::bind(const EvalContext& ctx)
{
    std::lock_guard lock(mutex_);
    space_hash_ = space_hash(ctx.space);
    cache_ = ctx.cache;
    work_dir_ = cache_ ? cache_->dir() : std::filesystem::path{};
    slots_.clear();
    slots_.resize(static_cast<std::size_t>(std::max(1, ctx.parallelism)));
}

std::unique_ptr<TrainerConnection> ExternalEvaluator::open_connection()
{
    auto conn = cfg_.endpoint.command.empty() ? TrainerConnection::connect_tcp(cfg_.endpoint.host, cfg_.endpoint.port)
                                              : TrainerConnection::spawn(cfg_.endpoint.command, work_dir_);
    wire_json hello;
    hello["type"] = "hello";
    hello["proto"] = kProtocolVersion;
    hello["space_hash"] = space_hash_;
    conn->send_line(hello.dump());

    const auto deadline = TrainerConnection::Clock::now() +
                          std::chrono::duration_cast<TrainerConnection::Clock::duration>(
                              std::chrono::duration<double>(cfg_.timeout_seconds));
    const wire_json reply = parse_message(conn->read_line(deadline));
    const std::string type = reply["type"].get<std::string>();
    if (type == "error")
        throw HandshakeError("trainer rejected handshake: " + field_or(reply, "code", "unknown") + " " +
                             field_or(reply, "message", ""));
    if (type != "hello_ok")
        throw HandshakeError("expected hello_ok, got '" + type + "'");
    if (!reply.contains("proto") || reply["proto"] != kProtocolVersion)
        throw HandshakeError("trainer speaks a different protocol version");
    if (field_or(reply, "space_hash", "") != space_hash_)
        throw HandshakeError("trainer search-space hash does not match");
    return conn;
}

EvalResult ExternalEvaluator::exchange(TrainerConnection& conn, const EvalRequest& req)
{
    wire_json msg;
    msg["type"] = "train";
    msg["arch_id"] = req.arch_id.str();
    msg["spec"] = wire_json::parse(canonical_json(req.spec));
    msg["seed"] = req.seed;
    msg["epochs"] = req.budget.epochs;
    if (!req.teacher_ids.empty()) {
        wire_json files = wire_json::array();
        for (const auto& id : req.teacher_ids)
            files.push_back(PredictionCache::data_file_name(id));
        msg["kd"] = {{"weight", req.kd_weight}, {"teacher_files", files}};
    }
    conn.send_line(msg.dump());

    const auto deadline = TrainerConnection::Clock::now() +
                          std::chrono::duration_cast<TrainerConnection::Clock::duration>(
                              std::chrono::duration<double>(cfg_.timeout_seconds));
    const wire_json reply = parse_message(conn.read_line(deadline));
    const std::string type = reply["type"].get<std::string>();
    const std::string reply_id = field_or(reply, "arch_id", "");

    if (type == "error") {
        if (!reply_id.empty() && reply_id != req.arch_id.str())
            throw CorrelationError("error reply for " + reply_id + " while waiting for " + req.arch_id.str());
        throw TrainerError(field_or(reply, "code", "unknown"), field_or(reply, "message", ""));
    }
    if (type != "result")
        throw EvalError("protocol", "expected result, got '" + type + "'");
    if (reply_id != req.arch_id.str())
        throw CorrelationError("result for '" + reply_id + "' while waiting for " + req.arch_id.str());

    EvalResult result;
    result.arch_id = req.arch_id;
    try {
        result.score = reply.at("score").get<double>();
        result.metric_name = field_or(reply, "metric", "unknown");
        if (auto it = reply.find("per_epoch"); it != reply.end())
            result.per_epoch = it->get<std::vector<double>>();
    } catch (const wire_json::exception& e) {
        throw EvalError("protocol", std::string("malformed result message: ") + e.what());
    }
    if (!std::isfinite(result.score))
        throw EvalError("protocol", "trainer reported a non-finite score");
    if (!result.per_epoch.empty()) {
        double best = result.per_epoch.front();
        for (double v : result.per_epoch)
            best = std::max(best, v);
        if (best != result.score)
            throw EvalError("protocol", "result score is not the best per-epoch score");
    }

    const std::string preds_file = field_or(reply, "preds_file", "");
    if (!preds_file.empty()) {
        if (preds_file != PredictionCache::data_file_name(req.arch_id))
            throw EvalError("protocol", "unexpected prediction file name '" + preds_file + "'");
        if (!cache_ || !cache_->contains(req.arch_id))
            throw EvalError("protocol", "trainer reported " + preds_file + " but no cache entry is present");
        result.preds_ref = req.arch_id;
    }
    return result;
}

EvalResult ExternalEvaluator::evaluate(const EvalRequest& req)
{
    std::size_t index;
    {
        std::unique_lock lock(mutex_);
        if (slots_.empty())
            throw ConfigError("external evaluator used before bind()");
        available_.wait(lock, [&] {
            for (const auto& s : slots_)
                if (!s.busy)
                    return true;
            return false;
        });
        index = 0;
        while (slots_[index].busy)
            ++index;
        slots_[index].busy = true;
    }
    struct Release {
        ExternalEvaluator& self;
        std::size_t index;
        ~Release()
        {
            std::lock_guard lock(self.mutex_);
            self.slots_[index].busy = false;
            self.available_.notify_one();
        }
    } release{*this, index};

    auto& conn = slots_[index].conn;
    for (int attempt = 0;; ++attempt) {
        try {
            if (!conn || conn->broken())
                conn = open_connection();
            return exchange(*conn, req);
        } catch (const TransportError&) {
            conn.reset();
            if (attempt >= cfg_.transport_retries)
                throw;
        } catch (const TimeoutError&) {
            conn.reset();
            throw;
        } catch (const CorrelationError&) {
            conn.reset();
            throw;
        } catch (const HandshakeError&) {
            conn.reset();
            throw;
        }
    }
}

}  // namespace seqnas
