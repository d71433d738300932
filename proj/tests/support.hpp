#pragma once

#include <initializer_list>

#include "aoisched/model.hpp"

// Small config builders shared across the test translation units.
namespace ts {

inline aoisched::DeviceParams dev(int packets, double reliability, int cap = 10) {
  aoisched::DeviceParams p;
  p.packets_per_update = packets;
  p.channel_reliability = reliability;
  p.cap_device = cap;
  p.cap_receiver = cap;
  p.cap_buffer = cap;
  return p;
}

inline aoisched::SystemConfig gaw1(int packets, double reliability, int cap = 10) {
  aoisched::SystemConfig c;
  c.variant = aoisched::ModelVariant::GenerateAtWill;
  c.max_scheduled = 1;
  c.devices.push_back(dev(packets, reliability, cap));
  return c;
}

inline aoisched::SystemConfig gaw(std::initializer_list<aoisched::DeviceParams> devices,
                                  int max_scheduled = 1) {
  aoisched::SystemConfig c;
  c.variant = aoisched::ModelVariant::GenerateAtWill;
  c.max_scheduled = max_scheduled;
  c.devices.assign(devices);
  return c;
}

inline aoisched::SystemConfig ra1(int packets, double reliability, double arrival,
                                  int cap = 10) {
  aoisched::SystemConfig c;
  c.variant = aoisched::ModelVariant::RandomArrival;
  c.max_scheduled = 1;
  c.devices.push_back(dev(packets, reliability, cap));
  c.devices[0].arrival_rate = arrival;
  return c;
}

inline aoisched::SystemConfig gen1(int packets, double reliability, int slots,
                                   int cap = 10) {
  aoisched::SystemConfig c;
  c.variant = aoisched::ModelVariant::NonZeroGenerationTime;
  c.max_scheduled = 1;
  c.devices.push_back(dev(packets, reliability, cap));
  c.devices[0].generation_slots = slots;
  return c;
}

}  // namespace ts
