#pragma once

// Coordinator / computation-server session: handshake, per-slot round-based
// boundary exchange, violation collection. One transport per region;
// concurrent slots are multiplexed by slot_id and demultiplexed into per-slot
// mailboxes by a reader thread.

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "dca/boundary.hpp"
#include "dca/partition.hpp"
#include "dca/powerflow.hpp"
#include "dca/protocol.hpp"
#include "dca/transport.hpp"

namespace dca {

struct SessionTimeouts {
  std::chrono::milliseconds handshake{10000};
  std::chrono::milliseconds slot{30000};
};

inline std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline json violation_to_json(const Violation& v) {
  return json{{"kind", to_string(v.kind)}, {"element", v.element_id},
              {"region", v.region},       {"value", v.value},
              {"limit", v.limit},         {"contingency", v.contingency_id}};
}

inline Violation violation_from_json(const json& j) {
  Violation v{};
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "BranchActiveFlow") v.kind = ViolationKind::BranchActiveFlow;
  else if (kind == "VoltageHigh") v.kind = ViolationKind::VoltageHigh;
  else if (kind == "VoltageLow") v.kind = ViolationKind::VoltageLow;
  else throw SchemaError("unknown violation kind " + kind);
  v.element_id = j.at("element").get<int>();
  v.region = j.at("region").get<int>();
  v.value = j.at("value").get<double>();
  v.limit = j.at("limit").get<double>();
  v.contingency_id = j.at("contingency").get<int>();
  return v;
}

namespace detail {

// Inbound frames for one slot.
struct Mailbox {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Frame> frames;
  bool dead = false;
  std::string dead_reason;

  void push(Frame f) {
    std::lock_guard lock(mu);
    frames.push_back(std::move(f));
    cv.notify_all();
  }

  void kill(const std::string& reason) {
    std::lock_guard lock(mu);
    dead = true;
    dead_reason = reason;
    cv.notify_all();
  }

  Frame pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu);
    if (!cv.wait_for(lock, timeout, [&] { return !frames.empty() || dead; }))
      throw SlotTimeout("timed out waiting for peer frame");
    if (frames.empty() && dead) throw ConnectionLost(dead_reason);
    Frame f = std::move(frames.front());
    frames.pop_front();
    return f;
  }
};

}  // namespace detail

// Coordinator's connection to one computation server. Validates inbound seq
// numbers (strictly increasing, gap-free per slot) and assigns outbound ones.
class PeerLink {
 public:
  PeerLink(int region, uint32_t session_id, std::unique_ptr<Transport> transport)
      : region_(region), session_id_(session_id), transport_(std::move(transport)) {
    reader_ = std::thread([this] { read_loop(); });
  }

  ~PeerLink() { shutdown(); }

  int region() const { return region_; }

  void shutdown() {
    transport_->close();
    if (reader_.joinable()) reader_.join();
  }

  void send(MessageType type, uint32_t slot, const json& payload, uint16_t flags = 0) {
    Frame f;
    f.msg_type = type;
    f.flags = flags;
    f.session_id = session_id_;
    f.slot_id = slot;
    {
      std::lock_guard lock(seq_mu_);
      f.seq = next_seq_[slot]++;
    }
    f.payload = payload.dump();
    transport_->send(f);
  }

  Frame await(uint32_t slot, std::chrono::milliseconds timeout) {
    return mailbox(slot).pop(timeout);
  }

  Transport& transport() { return *transport_; }

 private:
  detail::Mailbox& mailbox(uint32_t slot) {
    std::lock_guard lock(boxes_mu_);
    auto& box = boxes_[slot];
    if (!box) {
      box = std::make_unique<detail::Mailbox>();
      if (killed_) box->kill(killed_reason_);
    }
    return *box;
  }

  void read_loop() {
    try {
      Frame f;
      for (;;) {
        if (!transport_->recv(f, std::chrono::milliseconds(250))) continue;
        {
          std::lock_guard lock(seq_mu_);
          uint32_t expected = expected_seq_[f.slot_id];
          if (f.seq != expected) {
            kill_all("seq gap on slot " + std::to_string(f.slot_id));
            return;
          }
          expected_seq_[f.slot_id] = expected + 1;
        }
        mailbox(f.slot_id).push(std::move(f));
      }
    } catch (const ConnectionLost& e) {
      kill_all(std::string("region ") + std::to_string(region_) + ": " + e.what());
    } catch (const std::exception& e) {
      kill_all(std::string("region ") + std::to_string(region_) +
               " read loop failed: " + e.what());
    }
  }

  void kill_all(const std::string& reason) {
    std::lock_guard lock(boxes_mu_);
    for (auto& [slot, box] : boxes_)
      if (box) box->kill(reason);
    killed_reason_ = reason;
    killed_ = true;
  }

  int region_;
  uint32_t session_id_;
  std::unique_ptr<Transport> transport_;
  std::thread reader_;
  std::mutex seq_mu_;
  std::map<uint32_t, uint32_t> next_seq_, expected_seq_;
  std::mutex boxes_mu_;
  std::map<uint32_t, std::unique_ptr<detail::Mailbox>> boxes_;
  bool killed_ = false;
  std::string killed_reason_;
};

class CoordinatorSession {
 public:
  CoordinatorSession(uint32_t session_id, BoundaryLayout layout,
                     uint64_t case_fingerprint, uint64_t limits_hash,
                     SessionTimeouts timeouts = {})
      : session_id_(session_id), layout_(std::move(layout)),
        case_fingerprint_(case_fingerprint), limits_hash_(limits_hash),
        timeouts_(timeouts) {}

  void add_peer(int region, std::unique_ptr<Transport> transport) {
    if (links_.count(region))
      throw DuplicateRegion("region " + std::to_string(region) + " already registered");
    links_[region] = std::make_unique<PeerLink>(region, session_id_, std::move(transport));
  }

  const BoundaryLayout& layout() const { return layout_; }
  uint32_t session_id() const { return session_id_; }

  // INIT / INIT_ACK exchange; verifies layout-hash echoes and case
  // fingerprints, aborting the whole session on any mismatch.
  void handshake(const json& jfng_params) {
    json init;
    init["session"] = session_id_;
    init["regions"] = json::array();
    for (auto& [region, link] : links_) init["regions"].push_back(region);
    init["layout_hash"] = hash_hex(layout_.hash());
    init["jfng"] = jfng_params;
    init["limits_hash"] = hash_hex(limits_hash_);
    for (auto& [region, link] : links_) link->send(MessageType::Init, 0, init);

    std::set<int> seen;
    for (auto& [region, link] : links_) {
      Frame ack;
      try {
        ack = link->await(0, timeouts_.handshake);
      } catch (const SlotTimeout&) {
        abort_session("handshake timeout");
        throw HandshakeTimeout("region " + std::to_string(region) +
                               " did not answer INIT");
      }
      if (ack.msg_type != MessageType::InitAck) {
        abort_session("unexpected frame during handshake");
        throw ProtocolError("expected INIT_ACK, got " + to_string(ack.msg_type));
      }
      json body = json::parse(ack.payload);
      int echoed_region = body.at("region").get<int>();
      if (echoed_region != region || !seen.insert(echoed_region).second) {
        abort_session("duplicate or wrong region in INIT_ACK");
        throw DuplicateRegion("INIT_ACK region mismatch for region " +
                              std::to_string(region));
      }
      if (body.at("layout_hash").get<std::string>() != hash_hex(layout_.hash())) {
        abort_session("layout hash mismatch");
        throw LayoutHashMismatch("region " + std::to_string(region) +
                                 " echoed a different boundary layout hash");
      }
      if (body.at("case_fingerprint").get<std::string>() != hash_hex(case_fingerprint_)) {
        abort_session("case fingerprint mismatch");
        throw LayoutHashMismatch("region " + std::to_string(region) +
                                 " holds a different grid case");
      }
    }
    established_ = true;
  }

  // Announces a contingency to every server and waits for their acks.
  void start_round(uint32_t slot, int contingency_branch) {
    require_established();
    json body{{"slot", slot}, {"contingency", contingency_branch}};
    for (auto& [region, link] : links_) link->send(MessageType::StartRound, slot, body);
    for (auto& [region, link] : links_) expect_ack(*link, slot);
  }

  // One residual-evaluation round trip: all regions in flight at once.
  std::map<int, RegionReply> exchange_boundary_data(
      uint32_t slot, uint32_t round, const std::map<int, RegionRequest>& outbound,
      bool final_round = false) {
    require_established();
    for (auto& [region, req] : outbound) {
      json body;
      body["slot"] = slot;
      body["round"] = round;
      body["p_b"] = req.boundary_p;
      body["q_b"] = req.boundary_q;
      body["theta0"] = req.slack_angle;
      body["final"] = final_round;
      links_.at(region)->send(MessageType::BoundaryData, slot, body);
    }
    std::map<int, RegionReply> replies;
    for (auto& [region, req] : outbound) {
      auto& link = *links_.at(region);
      Frame f = link.await(slot, timeouts_.slot);
      if (f.msg_type == MessageType::Error) {
        json body = json::parse(f.payload);
        throw RegionSolveError(region, body.value("message", "region solve failed"));
      }
      if (f.msg_type != MessageType::BoundaryData)
        throw ProtocolError("expected BOUNDARY_DATA, got " + to_string(f.msg_type));
      json body = json::parse(f.payload);
      if (body.at("round").get<uint32_t>() != round) {
        json err{{"message", "round counter mismatch on slot " + std::to_string(slot)}};
        link.send(MessageType::Error, slot, err);
        throw ProtocolError("region " + std::to_string(region) +
                            " replied with a mismatched round counter");
      }
      RegionReply reply;
      auto vm = body.at("v_mag").get<std::vector<double>>();
      auto va = body.at("v_ang").get<std::vector<double>>();
      for (size_t i = 0; i < vm.size(); ++i)
        reply.boundary_voltages.push_back(std::polar(vm[i], va[i]));
      reply.slack_p = body.at("p_slack").get<double>();
      reply.slack_q = body.at("q_slack").get<double>();
      reply.converged = body.at("converged").get<bool>();
      reply.iterations = body.at("iterations").get<int>();
      reply.max_mismatch = body.at("max_mismatch").get<double>();
      replies[region] = std::move(reply);
      link.send(MessageType::DataAck, slot, json{{"slot", slot}, {"round", round}});
    }
    return replies;
  }

  // After a final exchange, each server reports its region's violations.
  std::vector<Violation> collect_violations(uint32_t slot, int contingency_id) {
    require_established();
    std::vector<Violation> all;
    for (auto& [region, link] : links_) {
      Frame f = link->await(slot, timeouts_.slot);
      if (f.msg_type != MessageType::ViolationReport)
        throw ProtocolError("expected VIOLATION_REPORT, got " + to_string(f.msg_type));
      json body = json::parse(f.payload);
      for (const auto& jv : body.at("violations")) {
        Violation v = violation_from_json(jv);
        v.contingency_id = contingency_id;
        all.push_back(v);
      }
    }
    std::sort(all.begin(), all.end(),
              [](const Violation& a, const Violation& b) { return a.key() < b.key(); });
    return all;
  }

  void broadcast(MessageType type, const json& payload = json::object()) {
    for (auto& [region, link] : links_) {
      try {
        link->send(type, 0, payload);
      } catch (const ConnectionLost&) {
      }
    }
  }

  void abort_session(const std::string& reason) {
    broadcast(MessageType::Error, json{{"message", reason}});
    aborted_ = true;
  }

  void finish() {
    broadcast(MessageType::Stop);
    broadcast(MessageType::Done);
    for (auto& [region, link] : links_) link->shutdown();
  }

 private:
  void require_established() {
    if (!established_) throw ProtocolError("session not established");
  }

  void expect_ack(PeerLink& link, uint32_t slot) {
    Frame f = link.await(slot, timeouts_.slot);
    if (f.msg_type == MessageType::Error)
      throw ProtocolError("peer error: " + json::parse(f.payload).value("message", ""));
    if (f.msg_type != MessageType::DataAck)
      throw ProtocolError("expected DATA_ACK, got " + to_string(f.msg_type));
  }

  uint32_t session_id_;
  BoundaryLayout layout_;
  uint64_t case_fingerprint_;
  uint64_t limits_hash_;
  SessionTimeouts timeouts_;
  std::map<int, std::unique_ptr<PeerLink>> links_;
  bool established_ = false;
  bool aborted_ = false;
};

// Residual-evaluation backend that round-trips through a coordinator session.
class RemoteRegionBackend : public RegionBackend {
 public:
  RemoteRegionBackend(CoordinatorSession& session, uint32_t slot)
      : session_(session), slot_(slot) {}

  std::map<int, RegionReply> solve_all(const std::map<int, RegionRequest>& outbound,
                                       bool final_round) override {
    return session_.exchange_boundary_data(slot_, round_++, outbound, final_round);
  }

  uint32_t round() const { return round_; }

 private:
  CoordinatorSession& session_;
  uint32_t slot_;
  uint32_t round_ = 0;
};

// One computation server: owns a region, answers one coordinator connection.
// Frames are handled in arrival order; per-slot state holds the
// outage-modified region grid.
class ComputationServer {
 public:
  ComputationServer(const PartitionedSystem& sys, int region_index,
                    uint64_t case_fingerprint, NewtonOptions newton_opts = {})
      : region_index_(region_index), base_region_(sys.region(region_index)),
        layout_(BoundaryLayout::from_system(sys)),
        case_fingerprint_(case_fingerprint), newton_opts_(newton_opts) {}

  // Serves until DONE/STOP or connection loss.
  void run(Transport& transport) {
    Frame f;
    for (;;) {
      try {
        if (!transport.recv(f, std::chrono::milliseconds(500))) continue;
      } catch (const ConnectionLost&) {
        return;
      }
      switch (f.msg_type) {
        case MessageType::Init:
          handle_init(transport, f);
          break;
        case MessageType::StartRound:
          handle_start_round(transport, f);
          break;
        case MessageType::BoundaryData:
          handle_boundary_data(transport, f);
          break;
        case MessageType::DataAck:
          break;  // transmit confirmation, nothing to do
        case MessageType::Stop:
          break;  // region sweep over; stay up for DONE
        case MessageType::Done:
        case MessageType::Error:
          return;
        default:
          send(transport, MessageType::Error, f.slot_id,
               json{{"message", "unexpected frame " + to_string(f.msg_type)}});
          return;
      }
    }
  }

 private:
  struct SlotState {
    RegionGrid grid;
    int contingency = -1;
    uint32_t last_round = 0;
    bool round_seen = false;
  };

  void send(Transport& transport, MessageType type, uint32_t slot, const json& payload) {
    Frame f;
    f.msg_type = type;
    f.session_id = session_id_;
    f.slot_id = slot;
    f.seq = next_seq_[slot]++;
    f.payload = payload.dump();
    transport.send(f);
  }

  void handle_init(Transport& transport, const Frame& f) {
    json body = json::parse(f.payload);
    session_id_ = body.at("session").get<uint32_t>();
    json ack;
    ack["region"] = region_index_;
    ack["layout_hash"] = layout_hash_override_.empty() ? hash_hex(layout_.hash())
                                                       : layout_hash_override_;
    ack["case_fingerprint"] = hash_hex(case_fingerprint_);
    send(transport, MessageType::InitAck, 0, ack);
  }

  void handle_start_round(Transport& transport, const Frame& f) {
    json body = json::parse(f.payload);
    int contingency = body.at("contingency").get<int>();
    SlotState state;
    state.grid = base_region_;
    state.contingency = contingency;
    if (contingency >= 0) {
      auto it = std::find_if(state.grid.branches.begin(), state.grid.branches.end(),
                             [&](const Branch& b) { return b.id == contingency; });
      if (it != state.grid.branches.end()) state.grid.branches.erase(it);
      // link-branch and other-region outages leave this region untouched
    }
    slots_[f.slot_id] = std::move(state);
    send(transport, MessageType::DataAck, f.slot_id,
         json{{"slot", f.slot_id}, {"contingency", contingency}});
  }

  void handle_boundary_data(Transport& transport, const Frame& f) {
    json body = json::parse(f.payload);
    auto it = slots_.find(f.slot_id);
    if (it == slots_.end()) {
      send(transport, MessageType::Error, f.slot_id,
           json{{"message", "slot " + std::to_string(f.slot_id) + " not started"}});
      return;
    }
    SlotState& state = it->second;
    uint32_t round = body.at("round").get<uint32_t>();
    if (state.round_seen && round <= state.last_round) {
      send(transport, MessageType::Error, f.slot_id,
           json{{"message", "round counter regression on slot " +
                                std::to_string(f.slot_id)}});
      return;
    }
    state.last_round = round;
    state.round_seen = true;

    auto pb = body.at("p_b").get<std::vector<double>>();
    auto qb = body.at("q_b").get<std::vector<double>>();
    double theta0 = body.at("theta0").get<double>();
    bool final_round = body.value("final", false);

    RegionSolution sol;
    try {
      sol = solve_region_power_flow(state.grid, pb, qb, theta0, std::nullopt,
                                    newton_opts_);
    } catch (const std::exception& e) {
      send(transport, MessageType::Error, f.slot_id, json{{"message", e.what()}});
      return;
    }

    json reply;
    reply["slot"] = f.slot_id;
    reply["round"] = round;
    json vm = json::array(), va = json::array();
    for (const auto& u : sol.boundary_voltages) {
      vm.push_back(std::abs(u));
      va.push_back(std::arg(u));
    }
    reply["v_mag"] = vm;
    reply["v_ang"] = va;
    reply["p_slack"] = sol.slack_p;
    reply["q_slack"] = sol.slack_q;
    reply["converged"] = sol.converged;
    reply["iterations"] = sol.iterations;
    reply["max_mismatch"] = sol.max_mismatch;
    send(transport, MessageType::BoundaryData, f.slot_id, reply);

    if (final_round && sol.converged) {
      auto violations = check_violations(state.grid, sol.v_mag, sol.v_ang,
                                         state.contingency);
      json report;
      report["slot"] = f.slot_id;
      report["violations"] = json::array();
      for (const auto& v : violations) report["violations"].push_back(violation_to_json(v));
      send(transport, MessageType::ViolationReport, f.slot_id, report);
    }
  }

 public:
  // test hook: echo a wrong layout hash to exercise handshake aborts
  void force_layout_hash(std::string hex) { layout_hash_override_ = std::move(hex); }

 private:
  int region_index_;
  RegionGrid base_region_;
  BoundaryLayout layout_;
  uint64_t case_fingerprint_;
  NewtonOptions newton_opts_;
  uint32_t session_id_ = 0;
  std::map<uint32_t, uint32_t> next_seq_;
  std::map<uint32_t, SlotState> slots_;
  std::string layout_hash_override_;
};

}  // namespace dca
