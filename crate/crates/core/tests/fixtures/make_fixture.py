"""Builds tests/fixtures/ten_frames.pcap with scapy and dumps the expected
per-packet fields to ten_frames.expected.csv using scapy's own dissectors.

Run from this directory: python3 make_fixture.py
"""
import ipaddress

from scapy.all import (ARP, ICMP, IP, TCP, UDP, Dot1Q, Ether, IPv6,
                       IPv6ExtHdrFragment, IPv6ExtHdrHopByHop, Raw, PcapWriter,
                       rdpcap)

SNAPS = {1: 24, 8: 64}

frames = [
    Ether() / IP(src="10.0.0.1", dst="10.0.0.2") / TCP(sport=1234, dport=80),
    # IPv4 header cut by a 24-byte snaplen below
    Ether() / IP(src="192.168.1.10", dst="8.8.8.8") / UDP(sport=5353, dport=53) / Raw(b"x" * 100),
    Ether() / IP(src="172.16.0.1", dst="172.16.0.2") / ICMP(),
    Ether() / ARP(psrc="10.0.0.1", pdst="10.0.0.9"),
    Ether() / Dot1Q(vlan=42) / IP(src="10.1.2.3", dst="10.3.2.1") / UDP(sport=1000, dport=2000),
    Ether() / IPv6(src="2001:db8::1", dst="2001:db8::2") / TCP(sport=443, dport=51000),
    Ether() / IPv6(src="fe80::1", dst="ff02::1") / IPv6ExtHdrHopByHop() / UDP(sport=546, dport=547),
    # non-first IPv4 fragment: no transport header present
    Ether() / IP(src="10.9.9.9", dst="10.8.8.8", proto=17, frag=100) / Raw(b"y" * 40),
    # large frame, captured with a 64-byte snaplen below
    Ether() / IP(src="1.2.3.4", dst="5.6.7.8") / TCP(sport=7, dport=9) / Raw(b"z" * 1400),
    Ether() / IPv6(src="2001:db8::a", dst="2001:db8::b") / IPv6ExtHdrFragment(offset=0, m=1) / UDP(sport=11, dport=22) / Raw(b"w" * 8),
]


def fields(pkt, wire_len):
    row = dict(wire_len=wire_len, ip_version="non_ip", src="0", dst="0", proto=0, sport=0, dport=0)
    if IP in pkt and len(bytes(pkt[IP])) < pkt[IP].ihl * 4:
        return row
    if IP in pkt:
        ip = pkt[IP]
        row.update(ip_version="v4", src=int(ipaddress.IPv4Address(ip.src)),
                   dst=int(ipaddress.IPv4Address(ip.dst)), proto=ip.proto)
        l4 = ip.payload if ip.frag == 0 else None
    elif IPv6 in pkt:
        ip6 = pkt[IPv6]
        row.update(ip_version="v6", src=int(ipaddress.IPv6Address(ip6.src)),
                   dst=int(ipaddress.IPv6Address(ip6.dst)))
        layer = ip6.payload
        nh = ip6.nh
        while isinstance(layer, (IPv6ExtHdrHopByHop, IPv6ExtHdrFragment)):
            nh = layer.nh
            if isinstance(layer, IPv6ExtHdrFragment) and layer.offset != 0:
                layer = None
                break
            layer = layer.payload
        row["proto"] = nh
        l4 = layer
    else:
        return row
    if row["proto"] in (6, 17) and isinstance(l4, (TCP, UDP)):
        row["sport"], row["dport"] = l4.sport, l4.dport
    return row


with PcapWriter("ten_frames.pcap", linktype=1, snaplen=65535, sync=True) as w:
    for i, f in enumerate(frames):
        raw = bytes(f)
        if i in SNAPS:
            # emulate a snapped capture: caplen < wire length
            p = Ether(raw[:SNAPS[i]])
            p.wirelen = len(raw)
            w.write(p)
        else:
            w.write(f)

with open("ten_frames.expected.csv", "w") as out:
    out.write("wire_len,ip_version,src_addr,dst_addr,proto,sport,dport\n")
    for pkt in rdpcap("ten_frames.pcap"):
        r = fields(pkt, pkt.wirelen)
        out.write("{wire_len},{ip_version},{src},{dst},{proto},{sport},{dport}\n".format(**r))
